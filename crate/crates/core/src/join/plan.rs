use crate::error::{Error, Result};
use crate::strata::StrataProfile;

use super::{
    side_is_sampled, stratum_target, stratum_target_exact, JoinAlgorithm, SamplePlan,
    SamplingRate, SizeAccount, StratumAccount, StratumPlan, Strategy,
};

/// Per-stratum strategy for the inflation-aware algorithm.
///
/// A side of stratum `a` is sampled iff `f * m_other(a) < 1`; a sampled side
/// contributes `round(f * m1(a) * m2(a))` tuples, an unsampled side its whole
/// stratum.
pub fn plan_overall(profile: &StrataProfile, f: SamplingRate) -> SamplePlan {
    let strata = profile
        .strata
        .iter()
        .map(|(key, c)| {
            let left_sampled = side_is_sampled(f, c.right);
            let right_sampled = side_is_sampled(f, c.left);
            let target = stratum_target(f, c.left, c.right);
            let target_exact = stratum_target_exact(f, c.left, c.right);
            // The gate implies the rounded target never exceeds the sampled side.
            debug_assert!(!left_sampled || target <= c.left);
            debug_assert!(!right_sampled || target <= c.right);
            StratumPlan {
                key: key.clone(),
                left_size: c.left,
                right_size: c.right,
                strategy: Strategy::from_gates(left_sampled, right_sampled),
                target,
                target_exact,
                left_input: if left_sampled { target } else { c.left },
                right_input: if right_sampled { target } else { c.right },
                zero_target: c.is_common() && target == 0,
            }
        })
        .collect();
    SamplePlan {
        rate: f.get(),
        strata,
    }
}

/// Plan for the primary-key/foreign-key case: only the left side is sampled,
/// `round(f * m1(a))` tuples per stratum.
pub fn plan_1n(profile: &StrataProfile, f: SamplingRate) -> SamplePlan {
    let strata = profile
        .strata
        .iter()
        .map(|(key, c)| {
            let target_exact = f.get() * c.left as f64;
            let target = if c.is_common() { target_exact.round() as u64 } else { 0 };
            StratumPlan {
                key: key.clone(),
                left_size: c.left,
                right_size: c.right,
                strategy: Strategy::FkPk,
                target,
                target_exact,
                left_input: target,
                right_input: 0,
                zero_target: c.is_common() && target == 0,
            }
        })
        .collect();
    SamplePlan {
        rate: f.get(),
        strata,
    }
}

/// Tuples kept out of the join by the inflation-aware plan:
/// `sum_i sum_j max(m_i^j - f * m_1^j * m_2^j, 0)`.
pub fn savings(profile: &StrataProfile, f: SamplingRate) -> f64 {
    profile
        .strata
        .values()
        .map(|c| {
            let t = stratum_target_exact(f, c.left, c.right);
            (c.left as f64 - t).max(0.0) + (c.right as f64 - t).max(0.0)
        })
        .sum()
}

pub(crate) fn check_primary_key(profile: &StrataProfile) -> Result<()> {
    for (key, c) in &profile.strata {
        if c.right > 1 {
            return Err(Error::Constraint(format!(
                "key {key} occurs {} times on the primary-key side",
                c.right
            )));
        }
        if c.left > 0 && c.right == 0 {
            return Err(Error::Constraint(format!(
                "foreign key {key} has no matching primary-key tuple"
            )));
        }
    }
    Ok(())
}

/// Size account an algorithm incurs on a profile, without running it.
///
/// Totals are exact. For the SRS family the per-stratum split of the sampled
/// side is random; the breakdown then holds its expectation.
pub fn expected_account(
    algorithm: JoinAlgorithm,
    profile: &StrataProfile,
    f: SamplingRate,
) -> Result<SizeAccount> {
    let baseline = profile.left_total + profile.right_total;
    let fv = f.get();
    let account = match algorithm {
        JoinAlgorithm::SimplifiedAqua => {
            check_primary_key(profile)?;
            SizeAccount {
                left: (fv * profile.left_total as f64).round() as u64,
                right: profile.right_total,
                baseline,
                strata: profile
                    .strata
                    .iter()
                    .map(|(k, c)| StratumAccount {
                        key: k.clone(),
                        left: fv * c.left as f64,
                        right: c.right as f64,
                    })
                    .collect(),
            }
        }
        JoinAlgorithm::StratJoin1n => {
            check_primary_key(profile)?;
            plan_1n(profile, f).account()
        }
        JoinAlgorithm::StreamSample | JoinAlgorithm::SrsBoth => {
            if profile.join_cardinality == 0 {
                return Ok(SizeAccount::empty(baseline));
            }
            let n = (fv * profile.join_cardinality as f64).round() as u64;
            let both = algorithm == JoinAlgorithm::SrsBoth;
            SizeAccount {
                left: n,
                right: if both { n } else { profile.right_total },
                baseline,
                strata: profile
                    .strata
                    .iter()
                    .map(|(k, c)| {
                        let expected = n as f64 * c.join_size() as f64
                            / profile.join_cardinality as f64;
                        StratumAccount {
                            key: k.clone(),
                            left: expected,
                            right: if both { expected } else { c.right as f64 },
                        }
                    })
                    .collect(),
            }
        }
        JoinAlgorithm::StratJoinNn | JoinAlgorithm::StratJoinBoth => {
            let both = algorithm == JoinAlgorithm::StratJoinBoth;
            let strata: Vec<StratumAccount> = profile
                .strata
                .iter()
                .map(|(k, c)| {
                    let t = stratum_target(f, c.left, c.right) as f64;
                    StratumAccount {
                        key: k.clone(),
                        left: t,
                        right: if both { t } else { c.right as f64 },
                    }
                })
                .collect();
            SizeAccount {
                left: strata.iter().map(|s| s.left as u64).sum(),
                right: strata.iter().map(|s| s.right as u64).sum(),
                baseline,
                strata,
            }
        }
        JoinAlgorithm::StratJoinOverall => plan_overall(profile, f).account(),
    };
    Ok(account)
}
