//! Two relations whose join is dominated by one heavy key on each side.
//!
//! R1 = {1 x1, 2 x99}, R2 = {1 x99, 2 x1}. The join has 198 tuples, 99 per
//! key. At f = 1/99 every algorithm should return two join tuples, but they
//! differ in how many base tuples they have to touch.

use stratjoin::{plan_overall, profile, JoinAlgorithm, RngHandle, SamplingRate, StratifiedRelation};

fn main() -> stratjoin::Result<()> {
    let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 1), (2, 99)]);
    let r2 = StratifiedRelation::from_strata("r2", &[(1i64, 99), (2, 1)]);
    let f = SamplingRate::new(1.0 / 99.0)?;
    let rng = RngHandle::new(7);

    let p = profile(&r1, &r2);
    println!("join size {}, |R1|+|R2| = {}", p.join_cardinality, p.left_total + p.right_total);

    for alg in [
        JoinAlgorithm::StreamSample,
        JoinAlgorithm::SrsBoth,
        JoinAlgorithm::StratJoinNn,
        JoinAlgorithm::StratJoinBoth,
        JoinAlgorithm::StratJoinOverall,
    ] {
        let run = alg.run(&r1, &r2, f, &rng)?;
        println!(
            "{:<18} output {:?}  account {} (left {}, right {})",
            alg.name(),
            run.sample.counts(),
            run.account.total(),
            run.account.left,
            run.account.right
        );
    }

    // Each stratum has one tuple on one side, so the plan samples the heavy
    // side down to a single tuple.
    for s in plan_overall(&p, f).strata {
        println!("key {}: {:?}, target {}", s.key, s.strategy, s.target);
    }
    Ok(())
}
