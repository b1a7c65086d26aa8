//! Splitting a fixed sample budget across relations and strata so that the
//! number of distinct samples the plan can produce is as large as possible.
//!
//! A plan assigns `mm[i][j]` tuples to relation `i`, stratum `j`. The number
//! of samples it can produce is `prod_ij C(m[i][j], mm[i][j])`.

mod binomial;
mod search;

use std::io::Read;
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::strata::{Key, StrataProfile};

pub use binomial::{binomial, ln_binomial, ln_gamma};
pub use search::{brute_force_optimal, OptimalSearch, DEFAULT_SEARCH_CAP};

/// Exact counts are only materialized when every cell is at most this large.
pub const EXACT_CELL_LIMIT: u64 = 10_000;

/// Tuple counts per relation (rows) and stratum (columns). Every cell is
/// positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrataMatrix {
    rows: Vec<Vec<u64>>,
}

impl StrataMatrix {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::ShapeMismatch("matrix needs at least one row and column".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} entries, expected {cols}",
                rows[i].len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(j) = row.iter().position(|&v| v == 0) {
                return Err(Error::Constraint(format!(
                    "stratum {j} is empty in relation {i}; exclude it before allocating"
                )));
            }
        }
        Ok(StrataMatrix { rows })
    }

    /// Drops strata that are empty in some relation. Returns the matrix and
    /// the indices of the dropped columns.
    pub fn excluding_empty(rows: Vec<Vec<u64>>) -> Result<(Self, Vec<usize>)> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged matrix".into()));
        }
        let excluded: Vec<usize> = (0..cols).filter(|&j| rows.iter().any(|r| r[j] == 0)).collect();
        let kept = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .enumerate()
                    .filter(|(j, _)| !excluded.contains(j))
                    .map(|(_, v)| v)
                    .collect()
            })
            .collect();
        Ok((StrataMatrix::new(kept)?, excluded))
    }

    /// Two-row matrix over the strata present in both relations, plus the keys
    /// that were dropped.
    pub fn from_profile(profile: &StrataProfile) -> Result<(Self, Vec<Key>, Vec<Key>)> {
        let kept: Vec<Key> = profile.common().map(|(k, _)| k.clone()).collect();
        let dropped = profile
            .strata
            .iter()
            .filter(|(_, c)| !c.is_common())
            .map(|(k, _)| k.clone())
            .collect();
        let rows = vec![
            kept.iter().map(|k| profile.get(k).left).collect(),
            kept.iter().map(|k| profile.get(k).right).collect(),
        ];
        Ok((StrataMatrix::new(rows)?, kept, dropped))
    }

    /// Parses `[[..], ..]` or `{"m": [[..], ..]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Bare(Vec<Vec<u64>>),
            Wrapped { m: Vec<Vec<u64>> },
        }
        let rows = match serde_json::from_str::<Doc>(text)? {
            Doc::Bare(m) | Doc::Wrapped { m } => m,
        };
        StrataMatrix::new(rows)
    }

    /// One relation per line; a non-numeric first line is taken as a header.
    pub fn from_delimited<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<u64>, _> = rec.iter().map(str::parse).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if n == 0 => continue,
                Err(e) => return Err(Error::Schema(format!("line {}: {e}", n + 1))),
            }
        }
        StrataMatrix::new(rows)
    }

    /// Reads JSON when the file ends in `.json`, delimited text otherwise.
    pub fn load(path: impl AsRef<Path>, delimiter: u8) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            StrataMatrix::from_json(&text)
        } else {
            StrataMatrix::from_delimited(text.as_bytes(), delimiter)
        }
    }

    pub fn relations(&self) -> usize {
        self.rows.len()
    }

    pub fn strata(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.strata()).map(|j| self.column(j).iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }
}

impl<'de> Deserialize<'de> for StrataMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<u64>>::deserialize(d)?;
        StrataMatrix::new(rows).map_err(serde::de::Error::custom)
    }
}

/// Sample counts per relation and stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub mm: Vec<Vec<u64>>,
    pub k_j: Vec<u64>,
    pub k: u64,
}

impl AllocationPlan {
    /// Builds a plan from its cells, deriving the stratum and grand totals.
    pub fn from_cells(mm: Vec<Vec<u64>>) -> Self {
        let cols = mm.first().map_or(0, Vec::len);
        let k_j: Vec<u64> = (0..cols).map(|j| mm.iter().map(|r| r[j]).sum()).collect();
        let k = k_j.iter().sum();
        AllocationPlan { mm, k_j, k }
    }

    /// Plan for a single stratum.
    pub fn single(split: Vec<u64>) -> Self {
        AllocationPlan::from_cells(split.into_iter().map(|v| vec![v]).collect())
    }

    /// Split of stratum `j` across relations.
    pub fn column(&self, j: usize) -> Vec<u64> {
        self.mm.iter().map(|r| r[j]).collect()
    }

    pub fn validate(&self, m: &StrataMatrix) -> Result<()> {
        if self.mm.len() != m.relations() || self.mm.iter().any(|r| r.len() != m.strata()) {
            return Err(Error::ShapeMismatch(format!(
                "plan is not {}x{}",
                m.relations(),
                m.strata()
            )));
        }
        for (i, row) in self.mm.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > m.get(i, j) {
                    return Err(Error::InvalidPlan(format!(
                        "cell ({i}, {j}) takes {v} of {} tuples",
                        m.get(i, j)
                    )));
                }
            }
        }
        let derived = AllocationPlan::from_cells(self.mm.clone());
        if derived.k_j != self.k_j || derived.k != self.k {
            return Err(Error::InvalidPlan("totals do not match cells".into()));
        }
        Ok(())
    }
}

fn serialize_exact<S: Serializer>(v: &Option<BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(n) => s.serialize_str(&n.to_string()),
        None => s.serialize_none(),
    }
}

/// Number of distinct samples a plan can produce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCount {
    /// Present when every cell is at most [`EXACT_CELL_LIMIT`].
    #[serde(serialize_with = "serialize_exact")]
    pub exact: Option<BigUint>,
    pub log_value: f64,
}

pub fn count_possible_samples(m: &StrataMatrix, plan: &AllocationPlan) -> Result<SampleCount> {
    plan.validate(m)?;
    let cells = || {
        m.rows()
            .iter()
            .flatten()
            .zip(plan.mm.iter().flatten())
            .map(|(&n, &k)| (n, k))
    };
    let log_value = cells().map(|(n, k)| ln_binomial(n, k)).sum();
    let exact = if m.rows().iter().flatten().all(|&n| n <= EXACT_CELL_LIMIT) {
        Some(cells().fold(BigUint::from(1u32), |acc, (n, k)| acc * binomial(n, k)))
    } else {
        None
    };
    Ok(SampleCount { exact, log_value })
}

/// Rounds `k * w_i / sum(w)` to the nearest integer (halves away from zero),
/// then moves single units by remainder until the total is `k` and no cell
/// exceeds its weight.
fn proportional_round(weights: &[u64], k: u64) -> Vec<u64> {
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let k = k as u128;
    let mut mm: Vec<u128> = weights
        .iter()
        .map(|&w| (2 * k * w as u128 + total) / (2 * total))
        .collect();
    // Scaled remainder k*w_i - mm_i*total.
    let rem = |mm: &[u128], i: usize| k as i128 * weights[i] as i128 - (mm[i] * total) as i128;
    let mut sum: u128 = mm.iter().sum();
    while sum > k {
        let i = (0..mm.len())
            .filter(|&i| mm[i] > 0)
            .min_by_key(|&i| (rem(&mm, i), i))
            .expect("sum is positive");
        mm[i] -= 1;
        sum -= 1;
    }
    while sum < k {
        let i = (0..mm.len())
            .filter(|&i| mm[i] < weights[i] as u128)
            .max_by_key(|&i| (rem(&mm, i), std::cmp::Reverse(i)))
            .expect("k does not exceed the total");
        mm[i] += 1;
        sum += 1;
    }
    mm.into_iter().map(|v| v as u64).collect()
}

/// Splits `k_j` sample tuples of one stratum across relations in proportion
/// to their sizes.
pub fn allocate_single_stratum(m: &[u64], k_j: u64) -> Result<Vec<u64>> {
    let total: u64 = m.iter().sum();
    if k_j > total {
        return Err(Error::Capacity {
            requested: k_j,
            available: total,
        });
    }
    Ok(proportional_round(m, k_j))
}

/// Gives each stratum a share of `k` proportional to its total size, then
/// splits every share with [`allocate_single_stratum`].
pub fn allocate_multi_strata(m: &StrataMatrix, k: u64) -> Result<AllocationPlan> {
    let total = m.total();
    if k > total {
        return Err(Error::Capacity {
            requested: k,
            available: total,
        });
    }
    let k_j = proportional_round(&m.column_sums(), k);
    let mut mm = vec![vec![0; m.strata()]; m.relations()];
    for (j, &kj) in k_j.iter().enumerate() {
        for (i, v) in allocate_single_stratum(&m.column(j), kj)?.into_iter().enumerate() {
            mm[i][j] = v;
        }
    }
    Ok(AllocationPlan { mm, k_j, k })
}

/// Uniformity Confidence: samples the plan can produce as a percentage of
/// the `C(N, k)` samples of size `k` from the pooled population.
pub fn uniformity_confidence(m: &StrataMatrix, plan: &AllocationPlan) -> Result<f64> {
    let count = count_possible_samples(m, plan)?;
    let all = ln_binomial(m.total(), plan.k);
    Ok(100.0 * (count.log_value - all).exp())
}

/// Error metrics of a heuristic allocation against the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationError {
    pub mse: f64,
    /// Mean of `((actual - predicted) / actual)^2` over cells with a nonzero
    /// optimum.
    pub msre: f64,
    pub max_diff: u64,
    pub cells: usize,
    /// Cells left out of the MSRE because the optimum is zero there.
    pub excluded: usize,
}

/// Accumulates [`AllocationError`] over many plans.
#[derive(Debug, Clone, Default)]
pub struct ErrorStats {
    sq: f64,
    rel_sq: f64,
    max_diff: u64,
    cells: usize,
    rel_cells: usize,
}

impl ErrorStats {
    pub fn add(&mut self, predicted: &[u64], actual: &[u64]) -> Result<()> {
        if predicted.len() != actual.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} cells vs {}",
                predicted.len(),
                actual.len()
            )));
        }
        for (&p, &a) in predicted.iter().zip(actual) {
            let d = a as f64 - p as f64;
            self.sq += d * d;
            self.max_diff = self.max_diff.max(a.abs_diff(p));
            self.cells += 1;
            if a != 0 {
                self.rel_sq += (d / a as f64).powi(2);
                self.rel_cells += 1;
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> AllocationError {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        AllocationError {
            mse: mean(self.sq, self.cells),
            msre: mean(self.rel_sq, self.rel_cells),
            max_diff: self.max_diff,
            cells: self.cells,
            excluded: self.cells - self.rel_cells,
        }
    }
}

pub fn allocation_error(predicted: &AllocationPlan, optimal: &AllocationPlan) -> Result<AllocationError> {
    if predicted.mm.len() != optimal.mm.len()
        || predicted.mm.iter().zip(&optimal.mm).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::ShapeMismatch("plans differ in shape".into()));
    }
    let flat = |p: &AllocationPlan| p.mm.iter().flatten().copied().collect::<Vec<_>>();
    let mut stats = ErrorStats::default();
    stats.add(&flat(predicted), &flat(optimal))?;
    Ok(stats.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(m: &[u64]) -> StrataMatrix {
        StrataMatrix::new(m.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn table5_counts() {
        let m = single(&[10, 20]);
        let rows: [(u64, u64, u64); 6] = [
            (6, 2, 218_025),
            (12, 4, 26_453_700),
            (18, 6, 26_453_700),
            (6, 1, 155_040),
            (12, 10, 190),
            (18, 10, 125_970),
        ];
        for (k, mm1, want) in rows {
            let plan = AllocationPlan::single(vec![mm1, k - mm1]);
            let c = count_possible_samples(&m, &plan).unwrap();
            assert_eq!(c.exact, Some(BigUint::from(want)));
            assert!(((c.log_value.exp() - want as f64) / want as f64).abs() < 1e-9);
        }
        let empty = count_possible_samples(&m, &AllocationPlan::single(vec![0, 0])).unwrap();
        assert_eq!(empty.exact, Some(BigUint::from(1u32)));
    }

    #[test]
    fn single_stratum_examples() {
        assert_eq!(allocate_single_stratum(&[10, 20], 6).unwrap(), vec![2, 4]);
        assert_eq!(allocate_single_stratum(&[10, 20], 12).unwrap(), vec![4, 8]);
        assert_eq!(allocate_single_stratum(&[10, 20], 18).unwrap(), vec![6, 12]);
        assert_eq!(allocate_single_stratum(&[10, 10], 10).unwrap(), vec![5, 5]);
        assert_eq!(allocate_single_stratum(&[10, 20], 31).unwrap_err().kind(), "capacity");
    }

    #[test]
    fn repair_fixes_overshoot_and_undershoot() {
        // Each rounds 0.5 up: 2 instead of 1.
        assert_eq!(allocate_single_stratum(&[1, 1], 1).unwrap(), vec![0, 1]);
        // Each rounds 1/3 down: 0 instead of 1.
        assert_eq!(allocate_single_stratum(&[1, 1, 1], 1).unwrap(), vec![1, 0, 0]);
        assert_eq!(allocate_single_stratum(&[5, 5, 5], 10).unwrap().iter().sum::<u64>(), 10);
    }

    #[test]
    fn two_relation_example_split() {
        let m = StrataMatrix::new(vec![vec![10, 5], vec![20, 15]]).unwrap();
        let plan = allocate_multi_strata(&m, 20).unwrap();
        assert_eq!(plan.k_j, vec![12, 8]);
        assert_eq!(plan.column(0), vec![4, 8]);
        assert_eq!(plan.column(1), vec![2, 6]);
        plan.validate(&m).unwrap();
    }

    #[test]
    fn multi_reduces_to_single() {
        let m = single(&[7, 11, 13]);
        for k in 0..=31 {
            let plan = allocate_multi_strata(&m, k).unwrap();
            assert_eq!(plan.column(0), allocate_single_stratum(&[7, 11, 13], k).unwrap());
        }
    }

    #[test]
    fn uc_values() {
        let m = single(&[10, 20]);
        let uc = uniformity_confidence(&m, &AllocationPlan::single(vec![2, 4])).unwrap();
        assert!((uc - 100.0 * 218_025.0 / 593_775.0).abs() < 1e-9);
        let full = uniformity_confidence(&m, &AllocationPlan::single(vec![10, 20])).unwrap();
        assert_eq!(full, 100.0);
        let lopsided = uniformity_confidence(&m, &AllocationPlan::single(vec![0, 6])).unwrap();
        assert!(lopsided < uc);
    }

    #[test]
    fn invalid_plans() {
        let m = single(&[10, 20]);
        let err = count_possible_samples(&m, &AllocationPlan::single(vec![11, 0])).unwrap_err();
        assert_eq!(err.kind(), "invalid_plan");
        let err = count_possible_samples(&m, &AllocationPlan::from_cells(vec![vec![1, 1]])).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
    }

    #[test]
    fn error_metrics() {
        let a = AllocationPlan::single(vec![2, 4]);
        let b = AllocationPlan::single(vec![3, 3]);
        let e = allocation_error(&a, &b).unwrap();
        assert_eq!((e.mse, e.max_diff), (1.0, 1));
        assert!((e.msre - (1.0 / 9.0 + 1.0 / 9.0) / 2.0).abs() < 1e-12);
        let z = allocation_error(&a, &a).unwrap();
        assert_eq!((z.mse, z.msre, z.max_diff), (0.0, 0.0, 0));
        let zero = allocation_error(&a, &AllocationPlan::single(vec![0, 6])).unwrap();
        assert_eq!(zero.excluded, 1);
        assert!(allocation_error(&a, &AllocationPlan::single(vec![1, 1, 4])).is_err());
    }

    #[test]
    fn matrix_parsing() {
        let m = StrataMatrix::from_json("[[10,5],[20,15]]").unwrap();
        assert_eq!(m.column_sums(), vec![30, 20]);
        let w = StrataMatrix::from_json(r#"{"m": [[1, 2]]}"#).unwrap();
        assert_eq!(w.total(), 3);
        let d = StrataMatrix::from_delimited("s1,s2\n10,5\n20,15\n".as_bytes(), b',').unwrap();
        assert_eq!(d, m);
        assert_eq!(StrataMatrix::from_json("[[1,0]]").unwrap_err().kind(), "constraint");
        assert_eq!(StrataMatrix::from_json("[[1],[2,3]]").unwrap_err().kind(), "shape_mismatch");
        let (kept, dropped) = StrataMatrix::excluding_empty(vec![vec![1, 0, 3], vec![2, 2, 2]]).unwrap();
        assert_eq!(kept.rows(), &[vec![1, 3], vec![2, 2]]);
        assert_eq!(dropped, vec![1]);
    }

    proptest! {
        #[test]
        fn repair_keeps_plan_valid(
            m in proptest::collection::vec(1u64..60, 1..6),
            frac in 0.0f64..=1.0,
        ) {
            let total: u64 = m.iter().sum();
            let k = (frac * total as f64).floor() as u64;
            let mm = allocate_single_stratum(&m, k).unwrap();
            prop_assert_eq!(mm.iter().sum::<u64>(), k);
            for (a, b) in mm.iter().zip(&m) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn multi_plan_is_valid(
            rows in proptest::collection::vec(proptest::collection::vec(1u64..30, 3), 1..4),
            frac in 0.0f64..=1.0,
        ) {
            let m = StrataMatrix::new(rows).unwrap();
            let k = (frac * m.total() as f64).floor() as u64;
            let plan = allocate_multi_strata(&m, k).unwrap();
            prop_assert!(plan.validate(&m).is_ok());
            prop_assert_eq!(plan.k, k);
        }

        #[test]
        fn count_is_invariant_under_relabeling(
            rows in proptest::collection::vec(proptest::collection::vec(1u64..25, 2), 2..4),
            frac in 0.0f64..=1.0,
        ) {
            let m = StrataMatrix::new(rows.clone()).unwrap();
            let k = (frac * m.total() as f64).floor() as u64;
            let plan = allocate_multi_strata(&m, k).unwrap();
            let mut rrows = rows;
            rrows.reverse();
            for r in &mut rrows { r.reverse(); }
            let mut rmm = plan.mm.clone();
            rmm.reverse();
            for r in &mut rmm { r.reverse(); }
            let a = count_possible_samples(&m, &plan).unwrap();
            let b = count_possible_samples(&StrataMatrix::new(rrows).unwrap(), &AllocationPlan::from_cells(rmm)).unwrap();
            prop_assert_eq!(a.exact, b.exact);
        }

        #[test]
        fn uc_is_a_percentage(
            m in proptest::collection::vec(1u64..40, 1..4),
            frac in 0.0f64..=1.0,
        ) {
            let total: u64 = m.iter().sum();
            let k = (frac * total as f64).floor() as u64;
            let plan = AllocationPlan::single(allocate_single_stratum(&m, k).unwrap());
            let uc = uniformity_confidence(&single(&m), &plan).unwrap();
            prop_assert!(uc > 0.0 && uc <= 100.0 + 1e-9);
            if k == 0 || k == total {
                prop_assert_eq!(uc, 100.0);
            }
        }
    }
}
