//! Sampling over equi-joins.
//!
//! Two families live here. The simple-random-sample family
//! ([`simplified_aqua`], [`stream_sample`], [`srs_both`]) produces a sample of
//! the whole join whose per-stratum counts vary from run to run. The stratified
//! family ([`stratjoin_1n`], [`stratjoin_nn`], [`stratjoin_both`],
//! [`stratjoin_overall`]) fixes the output size of every stratum in advance.
//!
//! Every algorithm reports a [`SizeAccount`]: the number of tuples of each
//! relation that have entered the join by the time output starts. Sides that
//! are not sampled are charged in full.

mod plan;
mod srs;
mod strat;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mini_join::{JoinSample, StratumSamples};
use crate::sampler::RngHandle;
use crate::strata::{profile, Key, StrataProfile, StratifiedRelation};

pub use plan::{expected_account, plan_1n, plan_overall, savings};
pub use srs::{simplified_aqua, srs_both, stream_sample};
pub use strat::{stratjoin_1n, stratjoin_both, stratjoin_nn, stratjoin_overall};

/// Join sampling rate f, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SamplingRate(f64);

impl SamplingRate {
    pub fn new(f: f64) -> Result<Self> {
        if f > 0.0 && f <= 1.0 {
            Ok(SamplingRate(f))
        } else {
            Err(Error::InvalidRate(f))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SamplingRate {
    type Error = Error;

    fn try_from(f: f64) -> Result<Self> {
        SamplingRate::new(f)
    }
}

impl From<SamplingRate> for f64 {
    fn from(f: SamplingRate) -> f64 {
        f.0
    }
}

/// f·m1·m2 before rounding.
pub fn stratum_target_exact(f: SamplingRate, left: u64, right: u64) -> f64 {
    f.get() * (left * right) as f64
}

/// Output size of a stratum: f·m1·m2 rounded half away from zero.
pub fn stratum_target(f: SamplingRate, left: u64, right: u64) -> u64 {
    stratum_target_exact(f, left, right).round() as u64
}

/// Whether sampling one side of a stratum pays off: f · m_other < 1.
pub fn side_is_sampled(f: SamplingRate, other_side: u64) -> bool {
    f.get() * (other_side as f64) < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    SampleNeither,
    SampleLeft,
    SampleRight,
    SampleBoth,
    FkPk,
}

impl Strategy {
    pub fn from_gates(left_sampled: bool, right_sampled: bool) -> Self {
        match (left_sampled, right_sampled) {
            (false, false) => Strategy::SampleNeither,
            (true, false) => Strategy::SampleLeft,
            (false, true) => Strategy::SampleRight,
            (true, true) => Strategy::SampleBoth,
        }
    }

    pub fn samples_anything(self) -> bool {
        self != Strategy::SampleNeither
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumPlan {
    pub key: Key,
    pub left_size: u64,
    pub right_size: u64,
    pub strategy: Strategy,
    /// Rounded output size for the stratum.
    pub target: u64,
    pub target_exact: f64,
    pub left_input: u64,
    pub right_input: u64,
    /// Set when a joining stratum rounds to an empty output.
    pub zero_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub rate: f64,
    pub strata: Vec<StratumPlan>,
}

impl SamplePlan {
    pub fn account(&self) -> SizeAccount {
        let baseline = self.strata.iter().map(|s| s.left_size + s.right_size).sum();
        SizeAccount {
            left: self.strata.iter().map(|s| s.left_input).sum(),
            right: self.strata.iter().map(|s| s.right_input).sum(),
            baseline,
            strata: self
                .strata
                .iter()
                .map(|s| StratumAccount {
                    key: s.key.clone(),
                    left: s.left_input as f64,
                    right: s.right_input as f64,
                })
                .collect(),
        }
    }

    pub fn stratum(&self, key: &Key) -> Option<&StratumPlan> {
        self.strata.iter().find(|s| &s.key == key)
    }

    pub fn targets(&self) -> BTreeMap<Key, u64> {
        self.strata
            .iter()
            .filter(|s| s.left_size > 0 && s.right_size > 0)
            .map(|s| (s.key.clone(), s.target))
            .collect()
    }

    fn common(&self) -> impl Iterator<Item = &StratumPlan> {
        self.strata.iter().filter(|s| s.left_size > 0 && s.right_size > 0)
    }

    /// Share of joining strata where at least one side is sampled.
    pub fn fraction_sampled(&self) -> f64 {
        let total = self.common().count();
        if total == 0 {
            return 0.0;
        }
        let sampled = self.common().filter(|s| s.strategy.samples_anything()).count();
        sampled as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumAccount {
    pub key: Key,
    /// Realized count, or its expectation for plans of the SRS family.
    pub left: f64,
    pub right: f64,
}

impl StratumAccount {
    pub fn total(&self) -> f64 {
        self.left + self.right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeAccount {
    pub left: u64,
    pub right: u64,
    /// |R1| + |R2|, the cost of joining without sampling.
    pub baseline: u64,
    pub strata: Vec<StratumAccount>,
}

impl SizeAccount {
    pub(crate) fn empty(baseline: u64) -> Self {
        SizeAccount {
            left: 0,
            right: 0,
            baseline,
            strata: Vec::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.left + self.right
    }

    /// Tuples saved relative to joining the full relations.
    pub fn savings(&self) -> i64 {
        self.baseline as i64 - self.total() as i64
    }

    pub fn stratum(&self, key: &Key) -> Option<&StratumAccount> {
        self.strata.iter().find(|s| &s.key == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinAlgorithm {
    SimplifiedAqua,
    StreamSample,
    SrsBoth,
    #[serde(rename = "stratjoin-1n")]
    StratJoin1n,
    #[serde(rename = "stratjoin-nn")]
    StratJoinNn,
    #[serde(rename = "stratjoin-both")]
    StratJoinBoth,
    #[serde(rename = "stratjoin-overall")]
    StratJoinOverall,
}

impl JoinAlgorithm {
    pub const ALL: [JoinAlgorithm; 7] = [
        JoinAlgorithm::SimplifiedAqua,
        JoinAlgorithm::StreamSample,
        JoinAlgorithm::SrsBoth,
        JoinAlgorithm::StratJoin1n,
        JoinAlgorithm::StratJoinNn,
        JoinAlgorithm::StratJoinBoth,
        JoinAlgorithm::StratJoinOverall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JoinAlgorithm::SimplifiedAqua => "simplified-aqua",
            JoinAlgorithm::StreamSample => "stream-sample",
            JoinAlgorithm::SrsBoth => "srs-both",
            JoinAlgorithm::StratJoin1n => "stratjoin-1n",
            JoinAlgorithm::StratJoinNn => "stratjoin-nn",
            JoinAlgorithm::StratJoinBoth => "stratjoin-both",
            JoinAlgorithm::StratJoinOverall => "stratjoin-overall",
        }
    }

    /// Requires a primary key on the right relation.
    pub fn needs_primary_key(self) -> bool {
        matches!(self, JoinAlgorithm::SimplifiedAqua | JoinAlgorithm::StratJoin1n)
    }

    pub fn with_replacement(self) -> bool {
        !self.needs_primary_key()
    }

    /// Whether per-stratum output sizes are fixed in advance.
    pub fn is_stratified(self) -> bool {
        matches!(
            self,
            JoinAlgorithm::StratJoin1n
                | JoinAlgorithm::StratJoinNn
                | JoinAlgorithm::StratJoinBoth
                | JoinAlgorithm::StratJoinOverall
        )
    }

    /// Fixed per-stratum output sizes for stratified algorithms, over the
    /// strata present in both relations.
    pub fn output_targets(self, profile: &StrataProfile, f: SamplingRate) -> Option<BTreeMap<Key, u64>> {
        if !self.is_stratified() {
            return None;
        }
        Some(
            profile
                .common()
                .map(|(k, c)| {
                    let t = if self == JoinAlgorithm::StratJoin1n {
                        (f.get() * c.left as f64).round() as u64
                    } else {
                        stratum_target(f, c.left, c.right)
                    };
                    (k.clone(), t)
                })
                .collect(),
        )
    }

    /// Total output size: fixed for every algorithm here.
    pub fn output_size(self, profile: &StrataProfile, f: SamplingRate) -> u64 {
        match self {
            JoinAlgorithm::SimplifiedAqua => (f.get() * profile.left_total as f64).round() as u64,
            JoinAlgorithm::StreamSample | JoinAlgorithm::SrsBoth => {
                (f.get() * profile.join_cardinality as f64).round() as u64
            }
            _ => self
                .output_targets(profile, f)
                .map_or(0, |t| t.values().sum()),
        }
    }

    pub fn run(
        self,
        left: &StratifiedRelation,
        right: &StratifiedRelation,
        f: SamplingRate,
        rng: &RngHandle,
    ) -> Result<JoinRun> {
        let mut run = JoinRun {
            algorithm: self,
            sample: JoinSample::default(),
            account: SizeAccount::empty(0),
            plan: None,
            left_samples: None,
            right_samples: None,
        };
        match self {
            JoinAlgorithm::SimplifiedAqua => {
                (run.sample, run.account) = simplified_aqua(left, right, f, rng)?;
            }
            JoinAlgorithm::StreamSample => {
                (run.sample, run.account) = stream_sample(left, right, f, rng);
            }
            JoinAlgorithm::SrsBoth => {
                let both = srs_both(left, right, f, rng);
                run.sample = both.sample;
                run.account = both.account;
                run.left_samples = Some(both.left);
                run.right_samples = Some(both.right);
            }
            JoinAlgorithm::StratJoin1n => {
                (run.sample, run.account) = stratjoin_1n(left, right, f, rng)?;
                run.plan = Some(plan_1n(&profile(left, right), f));
            }
            JoinAlgorithm::StratJoinNn => {
                (run.sample, run.account) = stratjoin_nn(left, right, f, rng);
            }
            JoinAlgorithm::StratJoinBoth => {
                let both = stratjoin_both(left, right, f, rng);
                run.sample = both.sample;
                run.account = both.account;
                run.left_samples = Some(both.left);
                run.right_samples = Some(both.right);
            }
            JoinAlgorithm::StratJoinOverall => {
                let overall = stratjoin_overall(left, right, f, rng);
                run.sample = overall.sample;
                run.account = overall.account;
                run.plan = Some(overall.plan);
            }
        }
        Ok(run)
    }
}

impl fmt::Display for JoinAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JoinAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JoinAlgorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Everything one execution of a join-sampling algorithm produced.
#[derive(Debug, Clone)]
pub struct JoinRun {
    pub algorithm: JoinAlgorithm,
    pub sample: JoinSample,
    pub account: SizeAccount,
    pub plan: Option<SamplePlan>,
    pub left_samples: Option<StratumSamples>,
    pub right_samples: Option<StratumSamples>,
}

/// Materialized samples of both sides plus their join.
#[derive(Debug, Clone)]
pub struct BothSides {
    pub left: StratumSamples,
    pub right: StratumSamples,
    pub sample: JoinSample,
    pub account: SizeAccount,
}

#[derive(Debug, Clone)]
pub struct OverallRun {
    pub plan: SamplePlan,
    pub sample: JoinSample,
    pub account: SizeAccount,
}

pub(crate) fn left_label(r: &StratifiedRelation) -> String {
    format!("left:{}", r.name())
}

pub(crate) fn right_label(r: &StratifiedRelation) -> String {
    format!("right:{}", r.name())
}
