//! Zipf-skewed relations: stratum sizes by key rank for a few skews, and a
//! round trip through a delimited file.

use stratjoin::{generate, strata_sizes, StratifiedRelation, ZipfSpec};

fn main() -> stratjoin::Result<()> {
    for z in [0.0, 1.0, 2.0, 3.0] {
        let spec = ZipfSpec { n_tuples: 10_000, z, n_keys: 20, seed: 1 };
        let sizes = strata_sizes(&spec)?;
        println!("z={z}: top {:?} ... last {}", &sizes[..5], sizes[sizes.len() - 1]);
    }

    let spec = ZipfSpec { n_tuples: 1_000, z: 1.5, n_keys: 50, seed: 9 };
    let rel = generate("orders", &spec)?;
    let path = std::env::temp_dir().join("stratjoin-zipf-example.csv");
    rel.emit(&path)?;
    let back = StratifiedRelation::ingest(&path, "JoinKey", b',')?;
    println!("\nwrote {} rows to {}", rel.len(), path.display());
    println!("round trip keeps the strata: {}", back.strata_counts() == rel.strata_counts());
    std::fs::remove_file(&path)?;
    Ok(())
}
