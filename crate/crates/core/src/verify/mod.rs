//! Empirical randomness checks over repeated seeded runs.
//!
//! A join tuple is identified by the positions of its two halves inside
//! their strata, `l_pos * m2 + r_pos`. Every check returns a [`TestReport`];
//! when a check runs several sub-tests its p-value is Bonferroni corrected.

pub mod chisq;
mod fixtures;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::allocation::ln_binomial;
use crate::error::{Error, Result};
use crate::join::{JoinAlgorithm, SamplingRate};
use crate::mini_join::JoinSample;
use crate::sampler::RngHandle;
use crate::strata::{profile, Key, StrataProfile, StratifiedRelation};

use chisq::{chi_square_gof, chi_square_sf};

pub use fixtures::{
    biased_nn, fixtures, plain_join_of_samples, Fixture, NegativeControl, NEGATIVE_CONTROLS,
};

pub const DEFAULT_ALPHA: f64 = 0.001;
/// Largest stratum join that is enumerated tuple by tuple.
pub const INSTANCE_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumStats {
    pub left_size: usize,
    pub right_size: usize,
    /// Occurrences per join tuple.
    pub occurrences: Vec<u64>,
    /// Joint counts of the tuples in output slots (0, 1), (2, 3), ...
    pub pairs: BTreeMap<(u32, u32), u64>,
}

impl StratumStats {
    pub fn join_size(&self) -> usize {
        self.left_size * self.right_size
    }

    pub fn pair_total(&self) -> u64 {
        self.pairs.values().sum()
    }
}

/// Counters accumulated over `trials` runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialStatistics {
    pub trials: u64,
    pub with_replacement: bool,
    /// Strata present in both inputs, in key order.
    pub keys: Vec<Key>,
    pub strata: BTreeMap<Key, StratumStats>,
    /// How often each per-trial vector of stratum counts occurred.
    pub count_vectors: BTreeMap<Vec<u32>, u64>,
}

impl TrialStatistics {
    fn new(left: &StratifiedRelation, right: &StratifiedRelation, with_replacement: bool) -> Result<Self> {
        let p = profile(left, right);
        let mut strata = BTreeMap::new();
        for (key, c) in p.common() {
            if c.join_size() > INSTANCE_CAP {
                return Err(Error::InstanceTooLarge(format!(
                    "stratum {key} has {} join tuples, cap is {INSTANCE_CAP}",
                    c.join_size()
                )));
            }
            strata.insert(
                key.clone(),
                StratumStats {
                    left_size: c.left as usize,
                    right_size: c.right as usize,
                    occurrences: vec![0; c.join_size() as usize],
                    pairs: BTreeMap::new(),
                },
            );
        }
        Ok(TrialStatistics {
            trials: 0,
            with_replacement,
            keys: strata.keys().cloned().collect(),
            strata,
            count_vectors: BTreeMap::new(),
        })
    }

    fn record(&mut self, sample: &JoinSample, left: &StratifiedRelation, right: &StratifiedRelation) -> Result<()> {
        self.trials += 1;
        let mut counts = Vec::with_capacity(self.keys.len());
        for key in &self.keys {
            let st = self.strata.get_mut(key).expect("key list matches strata");
            let tuples = sample.strata.get(key).map_or(&[][..], Vec::as_slice);
            counts.push(tuples.len() as u32);
            let ids: Vec<u32> = tuples
                .iter()
                .map(|t| (left.position_in_stratum(t.left_id) * st.right_size
                    + right.position_in_stratum(t.right_id)) as u32)
                .collect();
            for &i in &ids {
                st.occurrences[i as usize] += 1;
            }
            for pair in ids.chunks_exact(2) {
                *st.pairs.entry((pair[0], pair[1])).or_default() += 1;
            }
        }
        if let Some(extra) = sample.strata.keys().find(|k| !self.strata.contains_key(*k)) {
            return Err(Error::Constraint(format!("output stratum {extra} is not in both inputs")));
        }
        *self.count_vectors.entry(counts).or_default() += 1;
        Ok(())
    }

    /// Sum of the per-trial count vectors.
    pub fn pooled_counts(&self) -> Vec<u64> {
        let mut pooled = vec![0u64; self.keys.len()];
        for (v, &n) in &self.count_vectors {
            for (p, &c) in pooled.iter_mut().zip(v) {
                *p += c as u64 * n;
            }
        }
        pooled
    }
}

/// Runs `trials` independent executions of `algorithm` and accumulates
/// their outputs.
pub fn run_trials(
    algorithm: JoinAlgorithm,
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    trials: u64,
    seed: u64,
) -> Result<TrialStatistics> {
    run_trials_with(left, right, trials, seed, algorithm.with_replacement(), |rng| {
        Ok(algorithm.run(left, right, f, rng)?.sample)
    })
}

/// Like [`run_trials`] for an arbitrary sampler.
pub fn run_trials_with<F>(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    trials: u64,
    seed: u64,
    with_replacement: bool,
    mut sampler: F,
) -> Result<TrialStatistics>
where
    F: FnMut(&RngHandle) -> Result<JoinSample>,
{
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let mut stats = TrialStatistics::new(left, right, with_replacement)?;
    let root = RngHandle::new(seed);
    for t in 0..trials {
        let sample = sampler(&root.trial(t))?;
        stats.record(&sample, left, right)?;
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub criterion: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub pass: bool,
    pub alpha: f64,
    pub note: String,
}

impl TestReport {
    fn new(criterion: &str, statistic: f64, df: usize, p_value: f64, alpha: f64, note: String) -> Self {
        TestReport {
            criterion: criterion.to_string(),
            statistic,
            df,
            p_value,
            pass: p_value >= alpha,
            alpha,
            note,
        }
    }
}

/// Sub-test results folded into one report.
struct Bonferroni {
    tests: Vec<(String, f64, usize, f64)>,
}

impl Bonferroni {
    fn new() -> Self {
        Bonferroni { tests: Vec::new() }
    }

    fn push(&mut self, label: String, stat: f64, df: usize, p: f64) {
        self.tests.push((label, stat, df, p));
    }

    fn finish(self, criterion: &str, alpha: f64, vacuous: &str) -> TestReport {
        let Some(worst) = self
            .tests
            .iter()
            .min_by(|a, b| a.3.total_cmp(&b.3))
        else {
            return TestReport::new(criterion, 0.0, 0, 1.0, alpha, vacuous.to_string());
        };
        let n = self.tests.len();
        let p = (worst.3 * n as f64).min(1.0);
        let note = format!("{n} sub-tests, Bonferroni corrected; smallest p at {}", worst.0);
        TestReport::new(criterion, worst.1, worst.2, p, alpha, note)
    }
}

/// Every trial hit the per-stratum targets exactly.
pub fn check_strs1(stats: &TrialStatistics, targets: &BTreeMap<Key, u64>) -> TestReport {
    let want: Vec<u32> = stats
        .keys
        .iter()
        .map(|k| targets.get(k).copied().unwrap_or(0) as u32)
        .collect();
    let off: u64 = stats
        .count_vectors
        .iter()
        .filter(|(v, _)| **v != want)
        .map(|(_, n)| n)
        .sum();
    let p = if off == 0 { 1.0 } else { 0.0 };
    TestReport::new(
        "StRS_1",
        off as f64,
        0,
        p,
        DEFAULT_ALPHA,
        format!("{off} of {} trials missed the target counts", stats.trials),
    )
}

/// Occurrences of the join tuples of each stratum are uniform.
pub fn check_strs2(stats: &TrialStatistics, alpha: f64) -> Result<TestReport> {
    let mut b = Bonferroni::new();
    for (key, st) in &stats.strata {
        let n: u64 = st.occurrences.iter().sum();
        let j = st.join_size();
        if n == 0 || j == 1 {
            continue;
        }
        let expected = n as f64 / j as f64;
        if expected < 5.0 {
            return Err(Error::Underpowered(format!(
                "stratum {key}: {expected:.2} expected occurrences per join tuple"
            )));
        }
        let r = chi_square_gof(&st.occurrences, &vec![expected; j]);
        b.push(format!("stratum {key}"), r.statistic, r.df, r.p_value);
    }
    Ok(b.finish("StRS_2", alpha, "no stratum with more than one join tuple was sampled"))
}

/// Tuples in neighbouring output slots are independent.
///
/// With replacement this is a contingency test on the slot-pair table.
/// Without replacement both slots must differ and every ordered pair of
/// distinct tuples must be equally likely.
pub fn check_strs3(stats: &TrialStatistics, alpha: f64) -> Result<TestReport> {
    let mut b = Bonferroni::new();
    for (key, st) in &stats.strata {
        let n = st.pair_total();
        let j = st.join_size() as u64;
        if n == 0 || j == 1 {
            continue;
        }
        let label = format!("stratum {key}");
        if stats.with_replacement {
            if (n as f64) < 5.0 * (j * j) as f64 {
                return Err(Error::Underpowered(format!(
                    "stratum {key}: {n} slot pairs for {j}x{j} cells"
                )));
            }
            let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
            let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
            for (&(a, c), &o) in &st.pairs {
                *rows.entry(a).or_default() += o;
                *cols.entry(c).or_default() += o;
            }
            // sum (O-E)^2/E over all cells equals sum O^2/E - N.
            let nf = n as f64;
            let s: f64 = st
                .pairs
                .iter()
                .map(|(&(a, c), &o)| {
                    let e = rows[&a] as f64 * cols[&c] as f64 / nf;
                    (o as f64).powi(2) / e
                })
                .sum();
            let stat = (s - nf).max(0.0);
            let df = (rows.len() - 1) * (cols.len() - 1);
            b.push(label, stat, df, chi_square_sf(stat, df));
        } else {
            let cells = j * (j - 1);
            let e = n as f64 / cells as f64;
            if e < 5.0 {
                return Err(Error::Underpowered(format!(
                    "stratum {key}: {e:.2} expected count per ordered pair"
                )));
            }
            let diagonal: u64 = st.pairs.iter().filter(|((a, c), _)| a == c).map(|(_, o)| o).sum();
            if diagonal > 0 {
                b.push(label, f64::INFINITY, 0, 0.0);
                continue;
            }
            let s: f64 = st.pairs.values().map(|&o| (o as f64).powi(2) / e).sum();
            let stat = (s - n as f64).max(0.0);
            let df = cells as usize - 1;
            b.push(label, stat, df, chi_square_sf(stat, df));
        }
    }
    Ok(b.finish("StRS_3", alpha, "no stratum yields two output tuples"))
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|x| (ln_binomial(n, x) + x as f64 * p.ln() + (n - x) as f64 * (1.0 - p).ln()).exp())
        .collect()
}

/// Per-trial stratum counts follow Multinomial(n, p) with
/// `p_i = m1(i) * m2(i) / |join|`.
///
/// Two kinds of sub-test: the pooled counts against `T * n * p`, and for
/// every stratum the distribution of its per-trial count against
/// Binomial(n, p_i). The second catches samplers whose pooled counts are
/// right but whose per-trial counts do not vary.
pub fn check_multinomial(stats: &TrialStatistics, profile: &StrataProfile, alpha: f64) -> Result<TestReport> {
    let total = profile.join_cardinality as f64;
    if total == 0.0 {
        return Err(Error::Constraint("join is empty".into()));
    }
    let sizes: Vec<u32> = stats.count_vectors.keys().map(|v| v.iter().sum()).collect();
    let n = sizes.first().copied().unwrap_or(0) as u64;
    if sizes.iter().any(|&s| s as u64 != n) {
        return Err(Error::Constraint("output size varies between trials".into()));
    }
    let probs: Vec<f64> = stats
        .keys
        .iter()
        .map(|k| profile.get(k).join_size() as f64 / total)
        .collect();
    let mut b = Bonferroni::new();
    if n == 0 {
        return Ok(b.finish("multinomial", alpha, "empty outputs"));
    }

    let pooled = stats.pooled_counts();
    let grand = (stats.trials * n) as f64;
    let expected: Vec<f64> = probs.iter().map(|p| p * grand).collect();
    if let Some(e) = expected.iter().find(|&&e| e < 5.0) {
        return Err(Error::Underpowered(format!("pooled expected count {e:.2} below 5")));
    }
    let r = chi_square_gof(&pooled, &expected);
    b.push("pooled counts".into(), r.statistic, r.df, r.p_value);

    for (i, key) in stats.keys.iter().enumerate() {
        let p = probs[i];
        if p >= 1.0 {
            continue;
        }
        let mut per_count = vec![0u64; n as usize + 1];
        for (v, &c) in &stats.count_vectors {
            per_count[v[i] as usize] += c;
        }
        let pmf = binomial_pmf(n, p);
        // Merge neighbouring counts until each bin expects at least 5 trials.
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        let (mut o_acc, mut e_acc) = (0u64, 0.0);
        for x in 0..=n as usize {
            o_acc += per_count[x];
            e_acc += pmf[x] * stats.trials as f64;
            if e_acc >= 5.0 {
                obs.push(o_acc);
                exp.push(e_acc);
                o_acc = 0;
                e_acc = 0.0;
            }
        }
        match (obs.last_mut(), exp.last_mut()) {
            (Some(o), Some(e)) => {
                *o += o_acc;
                *e += e_acc;
            }
            _ => continue,
        }
        if obs.len() < 2 {
            continue;
        }
        let r = chi_square_gof(&obs, &exp);
        b.push(format!("count of stratum {key}"), r.statistic, r.df, r.p_value);
    }
    Ok(b.finish("multinomial", alpha, "nothing to test"))
}
