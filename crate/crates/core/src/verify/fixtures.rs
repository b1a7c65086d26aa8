//! Small instances for the randomness checks, and samplers that are known to
//! be wrong.

use rand::Rng;

use crate::error::Result;
use crate::join::{stratum_target, JoinAlgorithm, SamplingRate};
use crate::mini_join::{JoinSample, JoinedTuple};
use crate::sampler::RngHandle;
use crate::strata::{profile, StratifiedRelation};

use super::{check_multinomial, check_strs2, check_strs3, run_trials, run_trials_with, TestReport};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub left: StratifiedRelation,
    pub right: StratifiedRelation,
    pub f: SamplingRate,
    /// The right relation is keyed, so the foreign-key algorithms apply.
    pub primary_key: bool,
}

impl Fixture {
    fn new<K: Into<crate::strata::Key> + Clone>(
        name: &'static str,
        left: &[(K, usize)],
        right: &[(K, usize)],
        f: f64,
        primary_key: bool,
    ) -> Self {
        Fixture {
            name,
            left: StratifiedRelation::from_strata(format!("{name}-left"), left),
            right: StratifiedRelation::from_strata(format!("{name}-right"), right),
            f: SamplingRate::new(f).expect("fixture rates are valid"),
            primary_key,
        }
    }

    /// Stratified algorithms that apply to this fixture.
    pub fn stratified(&self) -> Vec<JoinAlgorithm> {
        JoinAlgorithm::ALL
            .into_iter()
            .filter(|a| a.is_stratified() && (self.primary_key || !a.needs_primary_key()))
            .collect()
    }

    pub fn srs(&self) -> [JoinAlgorithm; 2] {
        [JoinAlgorithm::StreamSample, JoinAlgorithm::SrsBoth]
    }
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture::new("motivating", &[(1i64, 1), (2, 99)], &[(1i64, 99), (2, 1)], 1.0 / 99.0, false),
        Fixture::new(
            "four-strata",
            &[("a", 10), ("b", 2), ("c", 3), ("d", 5)],
            &[("a", 2), ("b", 10), ("c", 3), ("d", 5)],
            0.2,
            false,
        ),
        Fixture::new("uniform3", &[(1i64, 4), (2, 4), (3, 4)], &[(1i64, 4), (2, 4), (3, 4)], 0.25, false),
        Fixture::new("skewed", &[(1i64, 8), (2, 1), (3, 2)], &[(1i64, 6), (2, 7), (3, 2)], 0.125, false),
        Fixture::new(
            "pkfk",
            &[(1i64, 10), (2, 5), (3, 4)],
            &[(1i64, 1), (2, 1), (3, 1), (4, 1)],
            0.4,
            true,
        ),
        Fixture::new("pkfk-small", &[("x", 4), ("y", 6)], &[("x", 1), ("y", 1)], 0.5, true),
    ]
}

fn fixture(name: &str) -> Fixture {
    fixtures()
        .into_iter()
        .find(|f| f.name == name)
        .expect("known fixture")
}

/// Many-to-many stratified sampler whose first output of every stratum is
/// always the stratum's first join tuple.
pub fn biased_nn(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> Result<JoinSample> {
    let mut sample = JoinAlgorithm::StratJoinNn.run(left, right, f, rng)?.sample;
    for (key, tuples) in sample.strata.iter_mut() {
        tuples[0] = JoinedTuple {
            key: key.clone(),
            left_id: left.stratum(key)[0],
            right_id: right.stratum(key)[0],
        };
    }
    Ok(sample)
}

/// Joins two stratum samples without Mini-Join: each left sample tuple is
/// matched with two right sample tuples, so neighbouring outputs share their
/// left half. Per-stratum counts and marginals are right.
pub fn plain_join_of_samples(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> Result<JoinSample> {
    let mut sample = JoinSample::default();
    for (key, c) in profile(left, right).common() {
        let n = stratum_target(f, c.left, c.right) as usize;
        let lpop = left.stratum(key);
        let rpop = right.stratum(key);
        let mut sub = rng.substream("plain-join", Some(key));
        let ls: Vec<usize> = (0..n.div_ceil(2)).map(|_| lpop[sub.gen_range(0..lpop.len())]).collect();
        let tuples = (0..n)
            .map(|i| JoinedTuple {
                key: key.clone(),
                left_id: ls[i / 2],
                right_id: rpop[sub.gen_range(0..rpop.len())],
            })
            .collect();
        sample.push_stratum(key.clone(), tuples);
    }
    Ok(sample)
}

/// Samplers that a correct check must reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeControl {
    /// [`biased_nn`] under the uniformity check.
    BiasedSampler,
    /// [`plain_join_of_samples`] under the independence check.
    PlainJoin,
    /// Stratified many-to-many output under the multinomial law.
    FixedCounts,
}

pub const NEGATIVE_CONTROLS: [NegativeControl; 3] = [
    NegativeControl::BiasedSampler,
    NegativeControl::PlainJoin,
    NegativeControl::FixedCounts,
];

impl NegativeControl {
    pub fn name(self) -> &'static str {
        match self {
            NegativeControl::BiasedSampler => "biased-sampler/StRS_2",
            NegativeControl::PlainJoin => "plain-join/StRS_3",
            NegativeControl::FixedCounts => "stratjoin-nn/multinomial",
        }
    }

    /// Runs the control; a correct harness returns a failing report.
    pub fn run(self, trials: u64, seed: u64, alpha: f64) -> Result<TestReport> {
        match self {
            NegativeControl::BiasedSampler => {
                let fx = fixture("uniform3");
                let stats = run_trials_with(&fx.left, &fx.right, trials, seed, true, |rng| {
                    biased_nn(&fx.left, &fx.right, fx.f, rng)
                })?;
                check_strs2(&stats, alpha)
            }
            NegativeControl::PlainJoin => {
                let fx = fixture("uniform3");
                let stats = run_trials_with(&fx.left, &fx.right, trials, seed, true, |rng| {
                    plain_join_of_samples(&fx.left, &fx.right, fx.f, rng)
                })?;
                check_strs3(&stats, alpha)
            }
            NegativeControl::FixedCounts => {
                let fx = fixture("motivating");
                let stats = run_trials(JoinAlgorithm::StratJoinNn, &fx.left, &fx.right, fx.f, trials, seed)?;
                check_multinomial(&stats, &profile(&fx.left, &fx.right), alpha)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::DEFAULT_ALPHA;

    #[test]
    fn fixtures_are_small() {
        for fx in fixtures() {
            let p = profile(&fx.left, &fx.right);
            assert!(p.common().all(|(_, c)| c.join_size() <= 100), "{}", fx.name);
            assert!(p.join_cardinality > 0);
        }
    }

    #[test]
    fn four_strata_covers_every_strategy() {
        use crate::join::{plan_overall, Strategy};
        let fx = fixture("four-strata");
        let plan = plan_overall(&profile(&fx.left, &fx.right), fx.f);
        let got: Vec<_> = plan.strata.iter().map(|s| (s.strategy, s.target)).collect();
        assert_eq!(
            got,
            vec![
                (Strategy::SampleLeft, 4),
                (Strategy::SampleRight, 4),
                (Strategy::SampleBoth, 2),
                (Strategy::SampleNeither, 5),
            ]
        );
    }

    #[test]
    fn plain_join_keeps_counts_and_marginals() {
        let fx = fixture("uniform3");
        let s = plain_join_of_samples(&fx.left, &fx.right, fx.f, &RngHandle::new(1)).unwrap();
        assert_eq!(s.total(), 12);
    }

    #[test]
    fn controls_fail() {
        for c in NEGATIVE_CONTROLS {
            let r = c.run(20_000, 3, DEFAULT_ALPHA).unwrap();
            assert!(!r.pass, "{}", c.name());
        }
    }
}
