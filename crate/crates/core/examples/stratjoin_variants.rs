//! The stratified algorithms on one skewed pair of relations, against the
//! simple-random-sample baselines.

use stratjoin::{generate, profile, JoinAlgorithm, RngHandle, SamplingRate, StratifiedRelation, ZipfSpec};

fn fk_pk() -> (StratifiedRelation, StratifiedRelation) {
    let orders = StratifiedRelation::from_strata("orders", &[(1i64, 40), (2, 25), (3, 10), (4, 5)]);
    let customers = StratifiedRelation::from_strata("customers", &[(1i64, 1), (2, 1), (3, 1), (4, 1)]);
    (orders, customers)
}

fn main() -> stratjoin::Result<()> {
    let rng = RngHandle::new(2024);

    // Foreign key to primary key: each sampled order joins exactly one customer.
    let (orders, customers) = fk_pk();
    let f = SamplingRate::new(0.2)?;
    for alg in [JoinAlgorithm::SimplifiedAqua, JoinAlgorithm::StratJoin1n] {
        let run = alg.run(&orders, &customers, f, &rng)?;
        println!("{:<16} counts {:?} account {}", alg.name(), run.sample.counts(), run.account.total());
    }

    let spec = |seed| ZipfSpec { n_tuples: 20_000, z: 1.0, n_keys: 200, seed };
    let left = generate("left", &spec(1))?;
    let right = generate("right", &spec(2))?;
    let p = profile(&left, &right);
    println!("\nzipf pair: join {} tuples over {} strata", p.join_cardinality, p.common().count());

    let f = SamplingRate::new(0.001)?;
    for alg in JoinAlgorithm::ALL.into_iter().filter(|a| !a.needs_primary_key()) {
        let run = alg.run(&left, &right, f, &rng)?;
        println!(
            "{:<18} output {:>6}  strata hit {:>3}  account {:>6}",
            alg.name(),
            run.sample.total(),
            run.sample.strata.len(),
            run.account.total()
        );
    }
    Ok(())
}
