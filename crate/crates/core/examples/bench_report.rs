//! A small experiment: several algorithms and rates over generated data,
//! written as a JSON report.

use stratjoin::report::{run_bench, write_report, Dataset, DatasetSource, ExperimentConfig, Format};
use stratjoin::{JoinAlgorithm, SamplingRate, ZipfSpec};

fn main() -> stratjoin::Result<()> {
    let zipf = |n, seed| DatasetSource::Zipf(ZipfSpec { n_tuples: n, z: 2.0, n_keys: 100, seed });
    let config = ExperimentConfig {
        algorithms: vec![
            JoinAlgorithm::StratJoinOverall,
            JoinAlgorithm::StreamSample,
            JoinAlgorithm::SrsBoth,
        ],
        rates: [0.001, 0.01, 0.1, 0.5]
            .into_iter()
            .map(SamplingRate::new)
            .collect::<stratjoin::Result<_>>()?,
        datasets: vec![Dataset {
            name: "zipf-2".into(),
            left: zipf(20_000, 1),
            right: zipf(10_000, 2),
        }],
        trials: 2,
        seed: 42,
        timings: false,
        out: None,
    };
    let rows = run_bench(&config)?;
    for r in &rows {
        println!(
            "f={:<6} {:<18} account {:>6}  vs overall {:>8}  strata sampled {}",
            r.f.to_string(),
            r.algorithm.name(),
            r.account_total.unwrap_or(0),
            r.ratio_to_overall.map_or("-".into(), |v| v.to_string()),
            r.fraction_strata_sampled.map_or("-".into(), |v| v.to_string()),
        );
    }
    write_report(&rows[..2], Format::Json, std::io::stdout())?;
    Ok(())
}
