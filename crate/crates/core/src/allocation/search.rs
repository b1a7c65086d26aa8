//! Exhaustive search for the allocation with the most possible samples.
//!
//! The objective `prod_ij C(m_ij, mm_ij)` factors over strata, so the search
//! first finds, for every stratum and every stratum total `t`, the best split
//! of `t` across relations by trying all of them. It then tries every way of
//! dividing `k` into stratum totals. Both stages are exhaustive; the result is
//! the optimum over all plans.

use std::cell::OnceCell;
use std::cmp::Ordering;

use num_bigint::BigUint;

use super::binomial::{binomial_row, ln_binomial_row};
use super::{AllocationPlan, SampleCount, StrataMatrix, EXACT_CELL_LIMIT};
use crate::error::{Error, Result};

pub const DEFAULT_SEARCH_CAP: u128 = 100_000_000;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

struct StratumTable {
    cells: Vec<u64>,
    ln_rows: Vec<Vec<f64>>,
    exact_rows: OnceCell<Vec<Vec<BigUint>>>,
    /// Best log count for every stratum total, `-inf` if unreachable.
    best_log: Vec<f64>,
    /// Best split for every stratum total, `z` entries each.
    best_split: Vec<u64>,
    /// Other splits scoring the same as the best one, flattened per total.
    ties: Vec<Vec<u64>>,
}

impl StratumTable {
    fn exact_rows(&self, k_max: u64) -> &[Vec<BigUint>] {
        self.exact_rows
            .get_or_init(|| self.cells.iter().map(|&m| binomial_row(m, k_max)).collect())
    }

    fn exact(&self, split: &[u64], k_max: u64) -> BigUint {
        let rows = self.exact_rows(k_max);
        split
            .iter()
            .enumerate()
            .fold(BigUint::from(1u32), |acc, (i, &x)| acc * &rows[i][x as usize])
    }

    fn split(&self, t: u64) -> &[u64] {
        let z = self.cells.len();
        &self.best_split[t as usize * z..(t as usize + 1) * z]
    }
}

/// Best allocations of every budget up to `k_max` for one matrix.
pub struct OptimalSearch {
    m: StrataMatrix,
    k_max: u64,
    exact: bool,
    tables: Vec<StratumTable>,
}

impl OptimalSearch {
    pub fn new(m: &StrataMatrix, k_max: u64) -> Result<Self> {
        OptimalSearch::with_cap(m, k_max, DEFAULT_SEARCH_CAP)
    }

    pub fn with_cap(m: &StrataMatrix, k_max: u64, cap: u128) -> Result<Self> {
        let total = m.total();
        if k_max > total {
            return Err(Error::Capacity {
                requested: k_max,
                available: total,
            });
        }
        let candidates = candidate_count(m, k_max);
        if candidates > cap {
            return Err(Error::SearchTooLarge { candidates, cap });
        }
        let exact = m.rows().iter().flatten().all(|&v| v <= EXACT_CELL_LIMIT);
        let tables = (0..m.strata())
            .map(|j| build_table(m.column(j), k_max, exact))
            .collect();
        Ok(OptimalSearch {
            m: m.clone(),
            k_max,
            exact,
            tables,
        })
    }

    /// Optimal plan with total `k`. Ties go to the lexicographically smallest
    /// vector of stratum totals, then the smallest split within each stratum.
    pub fn best(&self, k: u64) -> Result<(AllocationPlan, SampleCount)> {
        if k > self.k_max {
            return Err(Error::Config(format!(
                "budget {k} exceeds the search bound {}",
                self.k_max
            )));
        }
        let limits: Vec<u64> = self
            .m
            .column_sums()
            .into_iter()
            .map(|s| s.min(k))
            .collect();
        let mut cur = vec![0u64; limits.len()];
        let mut best: Option<(f64, Vec<u64>)> = None;
        self.compose(0, k, &limits, &mut cur, 0.0, &mut best);
        let (log_value, k_j) = best.ok_or(Error::Capacity {
            requested: k,
            available: self.m.total(),
        })?;

        let mut mm = vec![vec![0; self.m.strata()]; self.m.relations()];
        for (j, &t) in k_j.iter().enumerate() {
            for (i, &v) in self.tables[j].split(t).iter().enumerate() {
                mm[i][j] = v;
            }
        }
        let exact = self.exact.then(|| self.exact_of(&k_j));
        Ok((AllocationPlan { mm, k_j, k }, SampleCount { exact, log_value }))
    }

    /// Every vector of stratum totals that some optimal plan with total `k`
    /// uses, in lexicographic order.
    pub fn optimal_totals(&self, k: u64) -> Result<Vec<Vec<u64>>> {
        let (plan, count) = self.best(k)?;
        let limits: Vec<u64> = self.m.column_sums().into_iter().map(|s| s.min(k)).collect();
        let mut cur = vec![0u64; limits.len()];
        let mut out = Vec::new();
        self.collect(0, k, &limits, &mut cur, 0.0, &(count.log_value, plan.k_j), &mut out);
        Ok(out)
    }

    /// Every optimal split of stratum `j` for the stratum total `t`, the one
    /// [`OptimalSearch::best`] reports first.
    pub fn optimal_splits(&self, j: usize, t: u64) -> Vec<Vec<u64>> {
        let table = &self.tables[j];
        if t > self.k_max || table.best_log[t as usize] == f64::NEG_INFINITY {
            return Vec::new();
        }
        let z = table.cells.len();
        std::iter::once(table.split(t).to_vec())
            .chain(table.ties[t as usize].chunks(z).map(<[u64]>::to_vec))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn collect(
        &self,
        j: usize,
        remaining: u64,
        limits: &[u64],
        cur: &mut Vec<u64>,
        acc: f64,
        best: &(f64, Vec<u64>),
        out: &mut Vec<Vec<u64>>,
    ) {
        if j + 1 == limits.len() {
            if remaining > limits[j] {
                return;
            }
            cur[j] = remaining;
            let score = acc + self.tables[j].best_log[remaining as usize];
            let tie = near(score, best.0) && (!self.exact || self.exact_of(cur) == self.exact_of(&best.1));
            if tie {
                out.push(cur.clone());
            }
            return;
        }
        let rest: u64 = limits[j + 1..].iter().sum();
        let lo = remaining.saturating_sub(rest);
        for t in lo..=remaining.min(limits[j]) {
            cur[j] = t;
            let l = self.tables[j].best_log[t as usize];
            self.collect(j + 1, remaining - t, limits, cur, acc + l, best, out);
        }
    }

    fn exact_of(&self, k_j: &[u64]) -> BigUint {
        k_j.iter()
            .enumerate()
            .fold(BigUint::from(1u32), |acc, (j, &t)| {
                acc * self.tables[j].exact(self.tables[j].split(t), self.k_max)
            })
    }

    fn compose(
        &self,
        j: usize,
        remaining: u64,
        limits: &[u64],
        cur: &mut Vec<u64>,
        acc: f64,
        best: &mut Option<(f64, Vec<u64>)>,
    ) {
        let last = j + 1 == limits.len();
        if last {
            if remaining > limits[j] {
                return;
            }
            cur[j] = remaining;
            let score = acc + self.tables[j].best_log[remaining as usize];
            let better = match best {
                None => true,
                Some((b, bk)) => {
                    if near(score, *b) && self.exact {
                        self.exact_of(cur) > self.exact_of(bk)
                    } else {
                        score > *b && !near(score, *b)
                    }
                }
            };
            if better {
                *best = Some((score, cur.clone()));
            }
            return;
        }
        // Strata after this one can absorb at most this much.
        let rest: u64 = limits[j + 1..].iter().sum();
        let lo = remaining.saturating_sub(rest);
        for t in lo..=remaining.min(limits[j]) {
            cur[j] = t;
            let l = self.tables[j].best_log[t as usize];
            self.compose(j + 1, remaining - t, limits, cur, acc + l, best);
        }
    }
}

fn candidate_count(m: &StrataMatrix, k_max: u64) -> u128 {
    let per_stratum: u128 = (0..m.strata())
        .map(|j| {
            m.column(j)
                .iter()
                .map(|&v| v.min(k_max) as u128 + 1)
                .fold(1u128, |a, b| a.saturating_mul(b))
        })
        .fold(0u128, |a, b| a.saturating_add(b));
    // Compositions of k_max into `strata` parts.
    let n = m.strata() as u128 - 1;
    let mut comps: u128 = 1;
    for i in 1..=n {
        comps = comps.saturating_mul(k_max as u128 + i) / i;
    }
    per_stratum.saturating_add(comps)
}

fn build_table(cells: Vec<u64>, k_max: u64, exact: bool) -> StratumTable {
    let z = cells.len();
    let ln_rows: Vec<Vec<f64>> = cells.iter().map(|&m| ln_binomial_row(m, k_max)).collect();
    let slots = k_max as usize + 1;
    let mut table = StratumTable {
        cells,
        ln_rows,
        exact_rows: OnceCell::new(),
        best_log: vec![f64::NEG_INFINITY; slots],
        best_split: vec![0; slots * z],
        ties: vec![Vec::new(); slots],
    };
    let mut cur = vec![0u64; z];
    enumerate(&mut table, 0, 0, 0.0, &mut cur, k_max, exact);
    table
}

/// Visits every split with total at most `k_max` in lexicographic order and
/// keeps the first best one per total.
fn enumerate(
    table: &mut StratumTable,
    i: usize,
    used: u64,
    acc: f64,
    cur: &mut Vec<u64>,
    k_max: u64,
    exact: bool,
) {
    let z = cur.len();
    if i == z {
        let t = used as usize;
        let old = table.best_log[t];
        let order = if old == f64::NEG_INFINITY {
            Ordering::Greater
        } else if near(acc, old) {
            if exact {
                table.exact(cur, k_max).cmp(&table.exact(table.split(used), k_max))
            } else {
                Ordering::Equal
            }
        } else {
            acc.total_cmp(&old)
        };
        match order {
            Ordering::Greater => {
                table.best_log[t] = acc;
                table.best_split[t * z..(t + 1) * z].copy_from_slice(cur);
                table.ties[t].clear();
            }
            Ordering::Equal => table.ties[t].extend_from_slice(cur),
            Ordering::Less => {}
        }
        return;
    }
    let top = (k_max - used).min(table.ln_rows[i].len() as u64 - 1);
    for x in 0..=top {
        cur[i] = x;
        let l = table.ln_rows[i][x as usize];
        enumerate(table, i + 1, used + x, acc + l, cur, k_max, exact);
    }
    cur[i] = 0;
}

/// Optimal plan for budget `k`, searching at most [`DEFAULT_SEARCH_CAP`]
/// candidates.
pub fn brute_force_optimal(m: &StrataMatrix, k: u64) -> Result<(AllocationPlan, SampleCount)> {
    OptimalSearch::new(m, k)?.best(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{allocate_multi_strata, allocate_single_stratum, count_possible_samples};
    use proptest::prelude::*;

    fn single(m: &[u64]) -> StrataMatrix {
        StrataMatrix::new(m.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    /// Every plan with total `k`, scored exactly: the best count and how many
    /// plans reach it.
    fn naive_all(m: &StrataMatrix, k: u64) -> (BigUint, usize) {
        let cells: Vec<u64> = m.rows().iter().flatten().copied().collect();
        let mut best = (BigUint::from(0u32), 0);
        let mut cur = vec![0u64; cells.len()];
        fn go(cells: &[u64], i: usize, left: u64, cur: &mut Vec<u64>, m: &StrataMatrix, best: &mut (BigUint, usize)) {
            if i == cells.len() {
                if left == 0 {
                    let cols = m.strata();
                    let mm = cur.chunks(cols).map(<[u64]>::to_vec).collect();
                    let c = count_possible_samples(m, &AllocationPlan::from_cells(mm)).unwrap().exact.unwrap();
                    match c.cmp(&best.0) {
                        Ordering::Greater => *best = (c, 1),
                        Ordering::Equal => best.1 += 1,
                        Ordering::Less => {}
                    }
                }
                return;
            }
            for x in 0..=left.min(cells[i]) {
                cur[i] = x;
                go(cells, i + 1, left - x, cur, m, best);
            }
        }
        go(&cells, 0, k, &mut cur, m, &mut best);
        best
    }

    fn naive(m: &StrataMatrix, k: u64) -> BigUint {
        naive_all(m, k).0
    }

    #[test]
    fn table5_optima() {
        let m = single(&[10, 20]);
        let search = OptimalSearch::new(&m, 30).unwrap();
        for (k, mm1, count) in [(6, 2, 218_025u64), (12, 4, 26_453_700), (18, 6, 26_453_700)] {
            let (plan, c) = search.best(k).unwrap();
            assert_eq!(plan.column(0), vec![mm1, k - mm1]);
            assert_eq!(c.exact, Some(BigUint::from(count)));
            assert_eq!(plan.column(0), allocate_single_stratum(&[10, 20], k).unwrap());
        }
        let (full, c) = search.best(30).unwrap();
        assert_eq!(full.column(0), vec![10, 20]);
        assert_eq!(c.exact, Some(BigUint::from(1u32)));
    }

    #[test]
    fn two_relation_example_optimum() {
        let m = StrataMatrix::new(vec![vec![10, 5], vec![20, 15]]).unwrap();
        let (plan, c) = brute_force_optimal(&m, 20).unwrap();
        assert_eq!(plan.k_j[0], 12);
        assert_eq!(plan.k_j, allocate_multi_strata(&m, 20).unwrap().k_j);
        assert_eq!(c.exact.unwrap(), naive(&m, 20));
    }

    #[test]
    fn ties_pick_smallest_plan() {
        let m = single(&[4, 4]);
        let (plan, _) = brute_force_optimal(&m, 3).unwrap();
        assert_eq!(plan.column(0), vec![1, 2]);
    }

    #[test]
    fn all_optima_are_listed() {
        let m = single(&[4, 4]);
        let search = OptimalSearch::new(&m, 8).unwrap();
        assert_eq!(search.optimal_splits(0, 3), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(search.optimal_splits(0, 4), vec![vec![2, 2]]);
        let two = StrataMatrix::new(vec![vec![3, 3]]).unwrap();
        let search = OptimalSearch::new(&two, 6).unwrap();
        assert_eq!(search.optimal_totals(3).unwrap(), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(search.optimal_totals(2).unwrap(), vec![vec![1, 1]]);
    }

    #[test]
    fn cap_is_enforced() {
        let m = StrataMatrix::new(vec![vec![1000; 6]; 6]).unwrap();
        let err = OptimalSearch::with_cap(&m, 500, 1_000_000).err().unwrap();
        assert_eq!(err.kind(), "search_too_large");
        assert!(brute_force_optimal(&single(&[3, 4]), 8).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn factorized_matches_naive(
            rows in proptest::collection::vec(proptest::collection::vec(1u64..7, 1..4), 1..4),
            frac in 0.0f64..=1.0,
        ) {
            let cols = rows[0].len();
            let rows: Vec<Vec<u64>> = rows.into_iter().map(|mut r| { r.resize(cols, 1); r }).collect();
            let m = StrataMatrix::new(rows).unwrap();
            let k = (frac * m.total() as f64).floor() as u64;
            let (plan, c) = brute_force_optimal(&m, k).unwrap();
            prop_assert!(plan.validate(&m).is_ok());
            prop_assert_eq!(plan.k, k);
            let exact = c.exact.clone().unwrap();
            prop_assert_eq!(&exact, &naive(&m, k));
            prop_assert_eq!(Some(exact.clone()), count_possible_samples(&m, &plan).unwrap().exact);

            // Every listed optimum scores the same; nothing else does.
            let search = OptimalSearch::new(&m, k).unwrap();
            let totals = search.optimal_totals(k).unwrap();
            prop_assert!(totals.contains(&plan.k_j));
            let listed: usize = totals
                .iter()
                .map(|k_j| k_j.iter().enumerate().map(|(j, &t)| search.optimal_splits(j, t).len()).product::<usize>())
                .sum();
            prop_assert_eq!(listed, naive_all(&m, k).1);
            for k_j in &totals {
                let mut mm = vec![vec![0; m.strata()]; m.relations()];
                for (j, &t) in k_j.iter().enumerate() {
                    let splits = search.optimal_splits(j, t);
                    prop_assert!(!splits.is_empty());
                    for split in &splits {
                        let alt = AllocationPlan::single(split.clone());
                        let col = StrataMatrix::new(m.column(j).into_iter().map(|v| vec![v]).collect()).unwrap();
                        let first = AllocationPlan::single(splits[0].clone());
                        prop_assert_eq!(
                            count_possible_samples(&col, &alt).unwrap().exact,
                            count_possible_samples(&col, &first).unwrap().exact
                        );
                    }
                    for (i, &v) in splits[0].iter().enumerate() {
                        mm[i][j] = v;
                    }
                }
                let c = count_possible_samples(&m, &AllocationPlan::from_cells(mm)).unwrap();
                prop_assert_eq!(c.exact, Some(exact.clone()));
            }
        }

        #[test]
        fn one_search_serves_every_budget(
            m in proptest::collection::vec(1u64..15, 2..4),
        ) {
            let mat = single(&m);
            let total = mat.total();
            let search = OptimalSearch::new(&mat, total).unwrap();
            for k in 0..=total {
                let (a, _) = search.best(k).unwrap();
                let (b, _) = brute_force_optimal(&mat, k).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
