//! Stratified random sampling over equi-joins.
//!
//! A join is naturally stratified by its key: every key value `a` contributes
//! `m1(a) * m2(a)` output tuples. This crate samples such joins so that every
//! stratum gets a fixed, proportional number of output tuples, while charging
//! as few input tuples as possible.
//!
//! ```
//! use stratjoin::{JoinAlgorithm, RngHandle, SamplingRate, StratifiedRelation};
//!
//! let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 1000), (2, 5)]);
//! let r2 = StratifiedRelation::from_strata("r2", &[(1i64, 5), (2, 1000)]);
//! let f = SamplingRate::new(0.1)?;
//! let run = JoinAlgorithm::StratJoinOverall.run(&r1, &r2, f, &RngHandle::new(42))?;
//! assert_eq!(run.sample.total(), 1000);
//! assert_eq!(run.account.total(), 1010);
//! # Ok::<(), stratjoin::Error>(())
//! ```
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod allocation;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod join;
pub mod mini_join;
pub mod report;
pub mod sampler;
pub mod strata;
pub mod verify;

pub use allocation::{
    allocate_multi_strata, allocate_single_stratum, allocation_error, brute_force_optimal,
    count_possible_samples, uniformity_confidence, AllocationPlan, OptimalSearch, SampleCount,
    StrataMatrix,
};
pub use datagen::{generate, strata_sizes, ZipfSpec};
pub use error::{Error, Result};
pub use join::{
    expected_account, plan_overall, savings, JoinAlgorithm, JoinRun, SamplePlan, SamplingRate,
    SizeAccount, Strategy,
};
pub use mini_join::{mini_join, JoinSample, JoinedTuple, StratumSamples};
pub use sampler::{DrawSet, RngHandle};
pub use strata::{profile, Key, StrataProfile, StratifiedRelation};
