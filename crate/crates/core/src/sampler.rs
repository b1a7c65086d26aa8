//! Seeded sampling primitives.
//!
//! All randomness comes from ChaCha8 generators. A generator for a given
//! `(master seed, relation label, stratum key)` triple is derived by hashing
//! the triple into a 64-bit seed, so each stratum of each relation has its own
//! reproducible substream regardless of the order strata are processed in.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strata::{Key, StratifiedRelation};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(master: u64, relation: &str, stratum: Option<&Key>) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, relation.as_bytes());
    h = fnv1a(h, &[0xff]);
    if let Some(k) = stratum {
        h = fnv1a(h, &k.label_bytes());
    }
    mix64(h ^ mix64(master))
}

/// A labelled, seeded random stream.
#[derive(Debug, Clone)]
pub struct RngHandle {
    master_seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(master_seed: u64) -> Self {
        Self::labelled(master_seed, "root", None)
    }

    fn labelled(master_seed: u64, relation: &str, stratum: Option<&Key>) -> Self {
        let seed = derive_seed(master_seed, relation, stratum);
        let label = match stratum {
            Some(k) => format!("{relation}/{k}"),
            None => relation.to_string(),
        };
        RngHandle {
            master_seed,
            label,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for `(relation, stratum)` under the same master seed.
    /// The parent's own position does not influence the result.
    pub fn substream(&self, relation: &str, stratum: Option<&Key>) -> RngHandle {
        Self::labelled(self.master_seed, relation, stratum)
    }

    /// Root handle for the `index`-th repetition of an experiment.
    pub fn trial(&self, index: u64) -> RngHandle {
        let seed = mix64(derive_seed(self.master_seed, "trial", None) ^ mix64(index.wrapping_add(1)));
        RngHandle::new(seed)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Selected tuple ids, in draw order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DrawSet {
    pub tuple_ids: Vec<usize>,
    pub with_replacement: bool,
}

impl DrawSet {
    pub fn len(&self) -> usize {
        self.tuple_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuple_ids.is_empty()
    }
}

/// Uniform subset of size `n`, returned in random order.
pub fn draw_without_replacement(
    population: &[usize],
    n: usize,
    rng: &mut RngHandle,
) -> Result<DrawSet> {
    if n > population.len() {
        return Err(Error::Capacity {
            requested: n as u64,
            available: population.len() as u64,
        });
    }
    let picks = rand::seq::index::sample(rng, population.len(), n);
    Ok(DrawSet {
        tuple_ids: picks.into_iter().map(|i| population[i]).collect(),
        with_replacement: false,
    })
}

pub fn draw_with_replacement(
    population: &[usize],
    n: usize,
    rng: &mut RngHandle,
) -> Result<DrawSet> {
    if n == 0 {
        return Ok(DrawSet {
            tuple_ids: Vec::new(),
            with_replacement: true,
        });
    }
    if population.is_empty() {
        return Err(Error::Capacity {
            requested: n as u64,
            available: 0,
        });
    }
    let tuple_ids = (0..n)
        .map(|_| population[rng.gen_range(0..population.len())])
        .collect();
    Ok(DrawSet {
        tuple_ids,
        with_replacement: true,
    })
}

/// Draws `n` tuples independently, each with probability proportional to
/// `weight_of(tuple.key)`.
///
/// Weights are key-level, so a key is chosen first with probability
/// proportional to `weight * stratum size`, then a tuple uniformly inside it.
pub fn draw_weighted_with_replacement<F>(
    relation: &StratifiedRelation,
    weight_of: F,
    n: usize,
    rng: &mut RngHandle,
) -> Result<DrawSet>
where
    F: Fn(&Key) -> f64,
{
    let mut buckets = Vec::new();
    let mut weights = Vec::new();
    for (key, ids) in relation.index() {
        let w = weight_of(key);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Constraint(format!("weight for key {key} is {w}")));
        }
        if w > 0.0 {
            buckets.push(ids.as_slice());
            weights.push(w * ids.len() as f64);
        }
    }
    if weights.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::DegenerateWeights)?;
    let tuple_ids = (0..n)
        .map(|_| {
            let bucket = buckets[dist.sample(rng)];
            bucket[rng.gen_range(0..bucket.len())]
        })
        .collect();
    Ok(DrawSet {
        tuple_ids,
        with_replacement: true,
    })
}
