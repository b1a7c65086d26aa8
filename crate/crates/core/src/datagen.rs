//! Synthetic relations with Zipf-distributed join keys.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::RngHandle;
use crate::strata::StratifiedRelation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfSpec {
    pub n_tuples: u64,
    /// Skew exponent; 0 is uniform.
    pub z: f64,
    pub n_keys: u64,
    pub seed: u64,
}

impl ZipfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_keys == 0 {
            return Err(Error::Spec("need at least one key".into()));
        }
        if self.n_keys > self.n_tuples {
            return Err(Error::Spec(format!(
                "{} keys cannot fit in {} tuples",
                self.n_keys, self.n_tuples
            )));
        }
        if !self.z.is_finite() || self.z < 0.0 {
            return Err(Error::Spec(format!("skew must be a finite value >= 0, got {}", self.z)));
        }
        Ok(())
    }
}

/// Stratum size per key rank, proportional to `rank^-z` and rounded by
/// largest remainder so the sizes sum to `n_tuples`. Remainder ties go to the
/// lower rank. With strong skew, tail ranks can round to zero.
pub fn strata_sizes(spec: &ZipfSpec) -> Result<Vec<u64>> {
    spec.validate()?;
    let weights: Vec<f64> = (1..=spec.n_keys).map(|r| (r as f64).powf(-spec.z)).collect();
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * spec.n_tuples as f64).collect();
    let mut sizes: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let short = spec.n_tuples - sizes.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(short as usize) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Relation with columns `RID`, `JoinKey` and `Padding`. Rows are grouped by
/// key, key `r` being the rank with the `r`-th largest stratum.
pub fn generate(name: &str, spec: &ZipfSpec) -> Result<StratifiedRelation> {
    let sizes = strata_sizes(spec)?;
    let mut rng = RngHandle::new(spec.seed).substream("datagen-padding", None);
    let mut rows = Vec::with_capacity(spec.n_tuples as usize);
    for (rank, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            let rid = rows.len();
            rows.push(vec![
                rid.to_string(),
                (rank + 1).to_string(),
                rng.gen::<u32>().to_string(),
            ]);
        }
    }
    let header = ["RID", "JoinKey", "Padding"].map(String::from).to_vec();
    StratifiedRelation::from_rows(name, header, "JoinKey", rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::Key;
    use proptest::prelude::*;

    fn spec(n_tuples: u64, z: f64, n_keys: u64) -> ZipfSpec {
        ZipfSpec { n_tuples, z, n_keys, seed: 1 }
    }

    #[test]
    fn worked_sizes() {
        assert_eq!(strata_sizes(&spec(100, 0.0, 4)).unwrap(), vec![25; 4]);
        assert_eq!(strata_sizes(&spec(110, 1.0, 3)).unwrap(), vec![60, 30, 20]);
    }

    #[test]
    fn bad_specs() {
        assert_eq!(strata_sizes(&spec(3, 1.0, 4)).unwrap_err().kind(), "spec");
        assert!(strata_sizes(&spec(3, -1.0, 2)).is_err());
        assert!(strata_sizes(&spec(3, 1.0, 0)).is_err());
    }

    #[test]
    fn generated_relation_shape() {
        let r = generate("g", &spec(110, 1.0, 3)).unwrap();
        assert_eq!(r.header(), ["RID", "JoinKey", "Padding"]);
        assert_eq!(r.len(), 110);
        assert_eq!(r.count(&Key::Int(1)), 60);
        assert_eq!(r.tuple(5).fields[0], "5");
        let again = generate("g", &spec(110, 1.0, 3)).unwrap();
        assert_eq!(r.tuples(), again.tuples());
    }

    proptest! {
        #[test]
        fn sizes_sum_and_decrease(n in 1u64..100_000, z in 0u32..=3, keys in 1u64..1000) {
            prop_assume!(keys <= n);
            let s = strata_sizes(&spec(n, z as f64, keys)).unwrap();
            prop_assert_eq!(s.iter().sum::<u64>(), n);
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
            if z == 0 {
                let (lo, hi) = (s.iter().min().unwrap(), s.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
