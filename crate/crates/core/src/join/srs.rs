use std::collections::BTreeMap;

use rand::Rng;

use crate::error::Result;
use crate::mini_join::{JoinSample, JoinedTuple, StratumSamples};
use crate::sampler::{draw_weighted_with_replacement, draw_without_replacement, DrawSet, RngHandle};
use crate::strata::{profile, Key, StratifiedRelation};

use super::plan::check_primary_key;
use super::{left_label, right_label, BothSides, SamplingRate, SizeAccount, StratumAccount};

fn baseline(left: &StratifiedRelation, right: &StratifiedRelation) -> u64 {
    (left.len() + right.len()) as u64
}

/// Sample of the foreign-key relation joined with the primary-key relation.
///
/// Every foreign-key tuple joins exactly one primary-key tuple, so an SRS of
/// `r_fk` is an SRS of the join.
pub fn simplified_aqua(
    r_fk: &StratifiedRelation,
    r_pk: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> Result<(JoinSample, SizeAccount)> {
    check_primary_key(&profile(r_fk, r_pk))?;
    let n = (f.get() * r_fk.len() as f64).round() as usize;
    let all: Vec<usize> = (0..r_fk.len()).collect();
    let mut sub = rng.substream(&left_label(r_fk), None);
    let draw = draw_without_replacement(&all, n, &mut sub)?;

    let mut grouped: BTreeMap<Key, Vec<JoinedTuple>> = BTreeMap::new();
    for id in draw.tuple_ids {
        let key = &r_fk.tuple(id).key;
        let pk = r_pk.stratum(key)[0];
        grouped.entry(key.clone()).or_default().push(JoinedTuple {
            key: key.clone(),
            left_id: id,
            right_id: pk,
        });
    }
    let strata = r_pk
        .index()
        .keys()
        .chain(r_fk.index().keys())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|k| StratumAccount {
            key: k.clone(),
            left: grouped.get(k).map_or(0, Vec::len) as f64,
            right: r_pk.count(k) as f64,
        })
        .collect();
    let mut sample = JoinSample::default();
    for (k, v) in grouped {
        sample.push_stratum(k, v);
    }
    let account = SizeAccount {
        left: n as u64,
        right: r_pk.len() as u64,
        baseline: baseline(r_fk, r_pk),
        strata,
    };
    Ok((sample, account))
}

/// Shared draw of the SRS family: `n` left tuples weighted by their fan-out,
/// each matched with a uniform right tuple of its stratum, in draw order.
fn weighted_pairs(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> Option<Vec<(usize, usize)>> {
    let p = profile(left, right);
    if p.join_cardinality == 0 {
        return None;
    }
    let n = (f.get() * p.join_cardinality as f64).round() as usize;
    let mut lsub = rng.substream(&left_label(left), None);
    let draw = draw_weighted_with_replacement(left, |k| right.count(k) as f64, n, &mut lsub)
        .expect("join is nonempty so some weight is positive");
    let mut rsub = rng.substream(&right_label(right), None);
    Some(
        draw.tuple_ids
            .into_iter()
            .map(|l| {
                let bucket = right.stratum(&left.tuple(l).key);
                (l, bucket[rsub.gen_range(0..bucket.len())])
            })
            .collect(),
    )
}

fn group_pairs(left: &StratifiedRelation, pairs: &[(usize, usize)]) -> JoinSample {
    let mut grouped: BTreeMap<Key, Vec<JoinedTuple>> = BTreeMap::new();
    for &(l, r) in pairs {
        let key = left.tuple(l).key.clone();
        grouped.entry(key.clone()).or_default().push(JoinedTuple {
            key,
            left_id: l,
            right_id: r,
        });
    }
    let mut sample = JoinSample::default();
    for (k, v) in grouped {
        sample.push_stratum(k, v);
    }
    sample
}

/// With-replacement SRS of the join, streaming the right relation through a
/// hash index.
pub fn stream_sample(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> (JoinSample, SizeAccount) {
    let Some(pairs) = weighted_pairs(left, right, f, rng) else {
        return (JoinSample::default(), SizeAccount::empty(baseline(left, right)));
    };
    let sample = group_pairs(left, &pairs);
    let p = profile(left, right);
    let strata = p
        .strata
        .iter()
        .map(|(k, c)| StratumAccount {
            key: k.clone(),
            left: sample.count(k) as f64,
            right: c.right as f64,
        })
        .collect();
    let account = SizeAccount {
        left: pairs.len() as u64,
        right: right.len() as u64,
        baseline: baseline(left, right),
        strata,
    };
    (sample, account)
}

/// Materializes both samples before joining. `S2[i]` is the partner of
/// `S1[i]`, so the join consumes `S2` in insertion order and the output has
/// the same distribution as [`stream_sample`] (identical for the same seed).
pub fn srs_both(
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    f: SamplingRate,
    rng: &RngHandle,
) -> BothSides {
    let Some(pairs) = weighted_pairs(left, right, f, rng) else {
        return BothSides {
            left: StratumSamples::new(),
            right: StratumSamples::new(),
            sample: JoinSample::default(),
            account: SizeAccount::empty(baseline(left, right)),
        };
    };
    let mut s1 = StratumSamples::new();
    let mut s2 = StratumSamples::new();
    for &(l, r) in &pairs {
        let key = &left.tuple(l).key;
        push(&mut s1, key, l);
        push(&mut s2, key, r);
    }
    let sample = group_pairs(left, &pairs);
    let strata = profile(left, right)
        .strata
        .keys()
        .map(|k| {
            let c = sample.count(k) as f64;
            StratumAccount {
                key: k.clone(),
                left: c,
                right: c,
            }
        })
        .collect();
    let n = pairs.len() as u64;
    BothSides {
        left: s1,
        right: s2,
        sample,
        account: SizeAccount {
            left: n,
            right: n,
            baseline: baseline(left, right),
            strata,
        },
    }
}

fn push(samples: &mut StratumSamples, key: &Key, id: usize) {
    samples
        .entry(key.clone())
        .or_insert_with(|| DrawSet {
            tuple_ids: Vec::new(),
            with_replacement: true,
        })
        .tuple_ids
        .push(id);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::chisq::chi_square_uniform;

    fn rate(f: f64) -> SamplingRate {
        SamplingRate::new(f).unwrap()
    }

    fn motivating() -> (StratifiedRelation, StratifiedRelation) {
        (
            StratifiedRelation::from_strata("r1", &[(1i64, 1), (2, 99)]),
            StratifiedRelation::from_strata("r2", &[(1i64, 99), (2, 1)]),
        )
    }

    #[test]
    fn aqua_full_rate_is_full_join() {
        let fk = StratifiedRelation::from_strata("fk", &[(1i64, 4), (2, 3)]);
        let pk = StratifiedRelation::from_strata("pk", &[(1i64, 1), (2, 1), (3, 1)]);
        let (s, acc) = simplified_aqua(&fk, &pk, rate(1.0), &RngHandle::new(1)).unwrap();
        assert_eq!(s.total(), 7);
        assert_eq!((acc.left, acc.right), (7, 3));
    }

    #[test]
    fn aqua_inclusion_probability() {
        let fk = StratifiedRelation::from_strata("fk", &[(1i64, 600), (2, 400)]);
        let pk = StratifiedRelation::from_strata("pk", &[(1i64, 1), (2, 1)]);
        let root = RngHandle::new(5);
        let mut hits = vec![0u64; 1000];
        let trials = 2000;
        for t in 0..trials {
            let (s, _) = simplified_aqua(&fk, &pk, rate(0.1), &root.trial(t)).unwrap();
            assert_eq!(s.total(), 100);
            for jt in s.iter() {
                hits[jt.left_id] += 1;
            }
        }
        let mean = hits.iter().sum::<u64>() as f64 / (1000.0 * trials as f64);
        assert!((mean - 0.1).abs() < 1e-12);
        assert!(chi_square_uniform(&hits).p_value > 1e-3);
    }

    #[test]
    fn aqua_rejects_bad_keys() {
        let fk = StratifiedRelation::from_strata("fk", &[(1i64, 4)]);
        let dup = StratifiedRelation::from_strata("pk", &[(1i64, 2)]);
        assert_eq!(
            simplified_aqua(&fk, &dup, rate(0.5), &RngHandle::new(1)).unwrap_err().kind(),
            "constraint"
        );
        let missing = StratifiedRelation::from_strata("pk", &[(2i64, 1)]);
        assert!(simplified_aqua(&fk, &missing, rate(0.5), &RngHandle::new(1)).is_err());
    }

    #[test]
    fn stream_sample_single_tuple_is_uniform_over_join() {
        let (r1, r2) = motivating();
        let root = RngHandle::new(9);
        let f = rate(1.0 / 198.0);
        let mut counts = vec![0u64; 198];
        for t in 0..60_000 {
            let (s, acc) = stream_sample(&r1, &r2, f, &root.trial(t));
            assert_eq!(s.total(), 1);
            assert_eq!(acc.right, 100);
            let jt = s.iter().next().unwrap();
            let idx = if jt.key == Key::Int(1) {
                jt.right_id
            } else {
                98 + jt.left_id
            };
            counts[idx] += 1;
        }
        assert!(chi_square_uniform(&counts).p_value > 1e-3);
    }

    #[test]
    fn srs_both_matches_stream_sample() {
        let (r1, r2) = motivating();
        let rng = RngHandle::new(17);
        let (a, _) = stream_sample(&r1, &r2, rate(0.25), &rng);
        let b = srs_both(&r1, &r2, rate(0.25), &rng);
        assert_eq!(a, b.sample);
        for (k, s1) in &b.left {
            assert_eq!(s1.len(), b.right[k].len());
        }
        assert_eq!(b.account.left, b.account.right);
    }

    #[test]
    fn empty_join_gives_zero_account() {
        let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 3)]);
        let r2 = StratifiedRelation::from_strata("r2", &[(2i64, 3)]);
        let (s, acc) = stream_sample(&r1, &r2, rate(0.5), &RngHandle::new(1));
        assert!(s.is_empty());
        assert_eq!(acc.total(), 0);
        assert_eq!(acc.baseline, 6);
        assert!(srs_both(&r1, &r2, rate(0.5), &RngHandle::new(1)).sample.is_empty());
    }
}
