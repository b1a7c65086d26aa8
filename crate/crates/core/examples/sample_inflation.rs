//! Sample inflation on four strata at f = 0.1.
//!
//! Sampling a side only pays off when f times the other side's stratum is
//! below one. Otherwise the sample would need more tuples than the stratum
//! has, and the stratum is read in full.

use stratjoin::{
    expected_account, plan_overall, savings, JoinAlgorithm, Key, SamplingRate, StrataProfile,
};

fn main() -> stratjoin::Result<()> {
    let p = StrataProfile::from_counts(vec![
        (Key::Int(1), 1000, 5),
        (Key::Int(2), 1000, 15),
        (Key::Int(3), 5, 1000),
        (Key::Int(4), 15, 1000),
    ]);
    let f = SamplingRate::new(0.1)?;
    let plan = plan_overall(&p, f);

    println!("{:>4} {:>6} {:>6} {:>14} {:>7} {:>9} {:>9}", "key", "m1", "m2", "strategy", "target", "R1 input", "R2 input");
    for s in &plan.strata {
        println!(
            "{:>4} {:>6} {:>6} {:>14} {:>7} {:>9} {:>9}",
            s.key.to_string(),
            s.left_size,
            s.right_size,
            format!("{:?}", s.strategy),
            s.target,
            s.left_input,
            s.right_input
        );
    }

    let overall = plan.account();
    println!("\noverall account {} of {} (saves {:.0})", overall.total(), overall.baseline, savings(&p, f));
    for alg in [JoinAlgorithm::StreamSample, JoinAlgorithm::SrsBoth] {
        let acc = expected_account(alg, &p, f)?;
        let per: Vec<f64> = acc.strata.iter().map(|s| s.total()).collect();
        println!("{:<14} {:?} total {}", alg.name(), per, acc.total());
    }
    Ok(())
}
