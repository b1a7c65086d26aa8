//! Correlation-free join of two stratified samples.
//!
//! Within a stratum every sample position is used in at most one output
//! tuple: the smaller side is matched position-by-position against a uniformly
//! chosen subset of the larger side, in uniformly random order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sampler::{DrawSet, RngHandle};
use crate::strata::{Key, StratifiedRelation};

/// Per-stratum samples of one relation.
pub type StratumSamples = BTreeMap<Key, DrawSet>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinedTuple {
    pub key: Key,
    pub left_id: usize,
    pub right_id: usize,
}

impl JoinedTuple {
    /// Left row followed by the right row's non-key attributes.
    pub fn payload(&self, left: &StratifiedRelation, right: &StratifiedRelation) -> Vec<String> {
        let mut out = left.tuple(self.left_id).fields.clone();
        out.extend(right.tuple(self.right_id).payload().map(str::to_string));
        out
    }
}

/// Joined output grouped by stratum.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JoinSample {
    pub strata: BTreeMap<Key, Vec<JoinedTuple>>,
}

impl JoinSample {
    pub fn count(&self, key: &Key) -> usize {
        self.strata.get(key).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> BTreeMap<Key, usize> {
        self.strata.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    pub fn total(&self) -> usize {
        self.strata.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &JoinedTuple> {
        self.strata.values().flatten()
    }

    pub(crate) fn push_stratum(&mut self, key: Key, tuples: Vec<JoinedTuple>) {
        if !tuples.is_empty() {
            self.strata.insert(key, tuples);
        }
    }
}

/// Joins the positions of `left` and `right` for one stratum.
pub(crate) fn mini_join_stratum(
    key: &Key,
    left: &[usize],
    right: &[usize],
    rng: &mut RngHandle,
) -> Vec<JoinedTuple> {
    let c = left.len().min(right.len());
    if c == 0 {
        return Vec::new();
    }
    let lpos = rand::seq::index::sample(rng, left.len(), c);
    let rpos = rand::seq::index::sample(rng, right.len(), c);
    lpos.iter()
        .zip(rpos.iter())
        .map(|(l, r)| JoinedTuple {
            key: key.clone(),
            left_id: left[l],
            right_id: right[r],
        })
        .collect()
}

/// Mini-Join: for every stratum present in both inputs, emits
/// `min(|left|, |right|)` tuples, each input position used at most once.
///
/// Duplicate tuple ids inside a with-replacement draw are distinct positions.
pub fn mini_join(left: &StratumSamples, right: &StratumSamples, rng: &RngHandle) -> JoinSample {
    let mut out = JoinSample::default();
    for (key, l) in left {
        let Some(r) = right.get(key) else { continue };
        let mut sub = rng.substream("mini-join", Some(key));
        let tuples = mini_join_stratum(key, &l.tuple_ids, &r.tuple_ids, &mut sub);
        out.push_stratum(key.clone(), tuples);
    }
    out
}
