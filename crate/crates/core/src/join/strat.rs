use rand::Rng;

use crate::error::Result;
use crate::mini_join::{mini_join_stratum, JoinSample, JoinedTuple, StratumSamples};
use crate::sampler::{draw_with_replacement, draw_without_replacement, RngHandle};
use crate::strata::{profile, Key, StratifiedRelation};

use super::plan::check_primary_key;
use super::{
    left_label, plan_1n, plan_overall, right_label, stratum_target, BothSides, OverallRun,
    SamplingRate, SizeAccount, StratumAccount, Strategy,
};

fn baseline(left: &StratifiedRelation, right: &StratifiedRelation) -> u64 {
    (left.len() + right.len()) as u64
}

fn draw(population: &[usize], n: usize, rng: &mut RngHandle) -> Vec<usize> {
    draw_with_replacement(population, n, rng)
        .expect("strata in both relations are nonempty")
        .tuple_ids
}

/// Pairs every id of `sampled` with a uniform partner from `other`.
fn fan_out(
    key: &Key,
    sampled: &[usize],
    other: &[usize],
    rng: &mut RngHandle,
    sampled_is_left: bool,
) -> Vec<JoinedTuple> {
    sampled
        .iter()
        .map(|&s| {
            let o = other[rng.gen_range(0..other.len())];
            let (left_id, right_id) = if sampled_is_left { (s, o) } else { (o, s) };
            JoinedTuple {
                key: key.clone(),
                left_id,
                right_id,
            }
        })
        .collect()
}

/// Stratified sample for the foreign-key case: `round(f * m1(a))` tuples of
/// every stratum without replacement, each joined with its primary-key tuple.
pub fn stratjoin_1n(
    r_fk: &StratifiedRelation,
    r_pk: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> Result<(JoinSample, SizeAccount)> {
    let p = profile(r_fk, r_pk);
    check_primary_key(&p)?;
    let plan = plan_1n(&p, f);
    let mut sample = JoinSample::default();
    for s in &plan.strata {
        if s.target == 0 {
            continue;
        }
        let mut sub = rng.substream(&left_label(r_fk), Some(&s.key));
        let ids = draw_without_replacement(r_fk.stratum(&s.key), s.target as usize, &mut sub)?;
        let pk = r_pk.stratum(&s.key)[0];
        let tuples = ids
            .tuple_ids
            .into_iter()
            .map(|id| JoinedTuple {
                key: s.key.clone(),
                left_id: id,
                right_id: pk,
            })
            .collect();
        sample.push_stratum(s.key.clone(), tuples);
    }
    let mut account = plan.account();
    account.baseline = baseline(r_fk, r_pk);
    Ok((sample, account))
}

/// Many-to-many stratified sample: `n(a)` left tuples drawn with replacement
/// per stratum, each joined with a uniform right tuple of the same stratum.
pub fn stratjoin_nn(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> (JoinSample, SizeAccount) {
    let p = profile(left, right);
    let mut sample = JoinSample::default();
    let mut strata = Vec::with_capacity(p.strata.len());
    let mut total_left = 0;
    for (key, c) in &p.strata {
        let n = if c.is_common() { stratum_target(f, c.left, c.right) } else { 0 };
        total_left += n;
        strata.push(StratumAccount {
            key: key.clone(),
            left: n as f64,
            right: c.right as f64,
        });
        if n == 0 {
            continue;
        }
        let mut lsub = rng.substream(&left_label(left), Some(key));
        let mut rsub = rng.substream(&right_label(right), Some(key));
        let ids = draw(left.stratum(key), n as usize, &mut lsub);
        let tuples = fan_out(key, &ids, right.stratum(key), &mut rsub, true);
        sample.push_stratum(key.clone(), tuples);
    }
    let account = SizeAccount {
        left: total_left,
        right: right.len() as u64,
        baseline: baseline(left, right),
        strata,
    };
    (sample, account)
}

/// Samples `n(a)` tuples with replacement on both sides of every stratum and
/// joins them with Mini-Join.
pub fn stratjoin_both(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> BothSides {
    let p = profile(left, right);
    let mut s1 = StratumSamples::new();
    let mut s2 = StratumSamples::new();
    let mut sample = JoinSample::default();
    let mut strata = Vec::with_capacity(p.strata.len());
    let mut total = 0;
    for (key, c) in &p.strata {
        let n = if c.is_common() { stratum_target(f, c.left, c.right) } else { 0 };
        total += n;
        strata.push(StratumAccount {
            key: key.clone(),
            left: n as f64,
            right: n as f64,
        });
        if n == 0 {
            continue;
        }
        let l = draw_with_replacement(left.stratum(key), n as usize, &mut rng.substream(&left_label(left), Some(key)))
            .expect("stratum is nonempty");
        let r = draw_with_replacement(right.stratum(key), n as usize, &mut rng.substream(&right_label(right), Some(key)))
            .expect("stratum is nonempty");
        let mut msub = rng.substream("mini-join", Some(key));
        sample.push_stratum(key.clone(), mini_join_stratum(key, &l.tuple_ids, &r.tuple_ids, &mut msub));
        s1.insert(key.clone(), l);
        s2.insert(key.clone(), r);
    }
    BothSides {
        left: s1,
        right: s2,
        sample,
        account: SizeAccount {
            left: total,
            right: total,
            baseline: baseline(left, right),
            strata,
        },
    }
}

/// Executes the per-stratum plan of [`plan_overall`]: sample only the sides
/// whose gate fires and join the rest in full.
pub fn stratjoin_overall(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> OverallRun {
    let plan = plan_overall(&profile(left, right), f);
    let mut sample = JoinSample::default();
    for s in &plan.strata {
        if s.target == 0 || !(s.left_size > 0 && s.right_size > 0) {
            continue;
        }
        let key = &s.key;
        let n = s.target as usize;
        let lpop = left.stratum(key);
        let rpop = right.stratum(key);
        let mut lsub = rng.substream(&left_label(left), Some(key));
        let mut rsub = rng.substream(&right_label(right), Some(key));
        let tuples = match s.strategy {
            Strategy::SampleNeither => {
                let ids = draw(lpop, n, &mut lsub);
                fan_out(key, &ids, rpop, &mut rsub, true)
            }
            Strategy::SampleLeft => {
                let ids = draw(lpop, n, &mut lsub);
                fan_out(key, &ids, rpop, &mut rsub, true)
            }
            Strategy::SampleRight => {
                let ids = draw(rpop, n, &mut rsub);
                fan_out(key, &ids, lpop, &mut lsub, false)
            }
            Strategy::SampleBoth | Strategy::FkPk => {
                let l = draw(lpop, n, &mut lsub);
                let r = draw(rpop, n, &mut rsub);
                let mut msub = rng.substream("mini-join", Some(key));
                mini_join_stratum(key, &l, &r, &mut msub)
            }
        };
        sample.push_stratum(key.clone(), tuples);
    }
    let account = plan.account();
    OverallRun {
        plan,
        sample,
        account,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::join::{expected_account, JoinAlgorithm};
    use crate::verify::chisq::chi_square_uniform;
    use std::collections::BTreeMap;

    fn rate(f: f64) -> SamplingRate {
        SamplingRate::new(f).unwrap()
    }

    fn four_strata() -> (StratifiedRelation, StratifiedRelation) {
        (
            StratifiedRelation::from_strata("r1", &[(1i64, 1000), (2, 1000), (3, 5), (4, 15)]),
            StratifiedRelation::from_strata("r2", &[(1i64, 5), (2, 15), (3, 1000), (4, 1000)]),
        )
    }

    #[test]
    fn four_strata_overall_execution() {
        let (r1, r2) = four_strata();
        let run = stratjoin_overall(&r1, &r2, rate(0.1), &RngHandle::new(4));
        assert_eq!(run.account.total(), 3040);
        assert_eq!(run.account.baseline, 4040);
        let want: BTreeMap<Key, usize> = [(1, 500), (2, 1500), (3, 500), (4, 1500)]
            .into_iter()
            .map(|(k, n)| (Key::Int(k), n))
            .collect();
        assert_eq!(run.sample.counts(), want);
    }

    #[test]
    fn four_strata_both_and_nn_accounts() {
        let (r1, r2) = four_strata();
        let both = stratjoin_both(&r1, &r2, rate(0.1), &RngHandle::new(4));
        let s2 = both.account.stratum(&Key::Int(2)).unwrap();
        assert_eq!((s2.left, s2.right), (1500.0, 1500.0));
        assert_eq!(both.sample.count(&Key::Int(2)), 1500);
        let (nn, acc) = stratjoin_nn(&r1, &r2, rate(0.1), &RngHandle::new(4));
        assert_eq!(nn.count(&Key::Int(1)), 500);
        assert_eq!(acc.stratum(&Key::Int(1)).unwrap().total(), 505.0);
    }

    #[test]
    fn realized_accounts_match_expected() {
        let (r1, r2) = four_strata();
        for alg in JoinAlgorithm::ALL.into_iter().filter(|a| !a.needs_primary_key()) {
            let f = rate(0.1);
            let run = alg.run(&r1, &r2, f, &RngHandle::new(3)).unwrap();
            let exp = expected_account(alg, &profile(&r1, &r2), f).unwrap();
            assert_eq!((run.account.left, run.account.right), (exp.left, exp.right), "{alg}");
            assert_eq!(run.sample.total() as u64, alg.output_size(&profile(&r1, &r2), f));
        }
    }

    #[test]
    fn one_to_n_counts() {
        let fk = StratifiedRelation::from_strata("fk", &[(1i64, 10), (2, 10), (3, 10)]);
        let pk = StratifiedRelation::from_strata("pk", &[(1i64, 1), (2, 1), (3, 1)]);
        let (s, acc) = stratjoin_1n(&fk, &pk, rate(0.5), &RngHandle::new(2)).unwrap();
        for k in 1..=3 {
            assert_eq!(s.count(&Key::Int(k)), 5);
        }
        assert_eq!((acc.left, acc.right), (15, 0));
        let full = stratjoin_1n(&fk, &pk, rate(1.0), &RngHandle::new(2)).unwrap().0;
        assert_eq!(full.total(), 30);
    }

    #[test]
    fn one_to_n_subsets_are_uniform() {
        let fk = StratifiedRelation::from_strata("fk", &[(1i64, 5)]);
        let pk = StratifiedRelation::from_strata("pk", &[(1i64, 1)]);
        let root = RngHandle::new(12);
        let mut subsets: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for t in 0..20_000 {
            let (s, _) = stratjoin_1n(&fk, &pk, rate(0.4), &root.trial(t)).unwrap();
            let mut ids: Vec<usize> = s.iter().map(|j| j.left_id).collect();
            ids.sort();
            *subsets.entry(ids).or_default() += 1;
        }
        assert_eq!(subsets.len(), 10);
        let counts: Vec<u64> = subsets.into_values().collect();
        assert!(chi_square_uniform(&counts).p_value > 1e-3);
    }

    #[test]
    fn nn_tiny_stratum_slots_are_uniform() {
        let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 2)]);
        let r2 = StratifiedRelation::from_strata("r2", &[(1i64, 2)]);
        let root = RngHandle::new(6);
        let mut counts = vec![0u64; 4];
        for t in 0..20_000 {
            let (s, _) = stratjoin_nn(&r1, &r2, rate(0.5), &root.trial(t));
            assert_eq!(s.total(), 2);
            for j in s.iter() {
                counts[j.left_id * 2 + (j.right_id)] += 1;
            }
        }
        assert!(chi_square_uniform(&counts).p_value > 1e-3);
    }

    #[test]
    fn overall_at_full_rate_is_complete_size() {
        let r1 = StratifiedRelation::from_strata("r1", &[("a", 3), ("b", 2)]);
        let r2 = StratifiedRelation::from_strata("r2", &[("a", 2), ("b", 4)]);
        let run = stratjoin_overall(&r1, &r2, rate(1.0), &RngHandle::new(1));
        assert_eq!(run.sample.count(&Key::from("a")), 6);
        assert_eq!(run.sample.count(&Key::from("b")), 8);
        assert!(run.plan.strata.iter().all(|s| s.strategy == Strategy::SampleNeither));
    }

    #[test]
    fn sample_both_uses_each_sample_position_once() {
        let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 3)]);
        let r2 = StratifiedRelation::from_strata("r2", &[(1i64, 3)]);
        let run = stratjoin_overall(&r1, &r2, rate(0.3), &RngHandle::new(1));
        assert_eq!(run.plan.strata[0].strategy, Strategy::SampleBoth);
        assert_eq!(run.sample.total(), 3);
        assert_eq!(run.account.total(), 6);
        let both = stratjoin_both(&r1, &r2, rate(0.3), &RngHandle::new(1));
        let mut got: Vec<_> = both.sample.iter().map(|j| j.left_id).collect();
        let mut want = both.left[&Key::Int(1)].tuple_ids.clone();
        want.sort();
        got.sort();
        assert_eq!(got, want);
    }
}
