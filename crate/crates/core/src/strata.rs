//! Stratified in-memory relations.
//!
//! A relation is stored row-wise and indexed by join-key value. Every distinct
//! key is a stratum; iteration over strata is always in sorted key order so
//! that random substreams and emitted output are reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A join-column value.
///
/// A column whose non-null values all parse as `i64` is ingested as integer
/// keys, anything else as string keys. Integer keys order before string keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Key {
    Int(i64),
    Str(String),
}

impl Key {
    /// Bytes that identify the key when deriving random substreams.
    pub(crate) fn label_bytes(&self) -> Vec<u8> {
        match self {
            Key::Int(v) => {
                let mut out = vec![b'i'];
                out.extend_from_slice(&v.to_le_bytes());
                out
            }
            Key::Str(s) => {
                let mut out = vec![b's'];
                out.extend_from_slice(s.as_bytes());
                out
            }
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Int(v) => write!(f, "{v}"),
            Key::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Key {
    fn from(v: i64) -> Self {
        Key::Int(v)
    }
}

impl From<&str> for Key {
    fn from(v: &str) -> Self {
        Key::Str(v.to_string())
    }
}

/// One ingested row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub id: usize,
    pub key: Key,
    /// Every field of the row as read, join column included.
    pub fields: Vec<String>,
    join_column: usize,
}

impl Tuple {
    /// Non-key attributes in column order.
    pub fn payload(&self) -> impl Iterator<Item = &str> + '_ {
        self.fields
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.join_column)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct StratifiedRelation {
    name: String,
    header: Vec<String>,
    join_column: usize,
    delimiter: u8,
    tuples: Vec<Tuple>,
    index: BTreeMap<Key, Vec<usize>>,
    /// Position of each tuple inside its stratum bucket.
    positions: Vec<usize>,
    rejected_rows: usize,
}

impl StratifiedRelation {
    /// Reads a delimited file whose first row is a header.
    pub fn ingest(path: impl AsRef<Path>, join_column: &str, delimiter: u8) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "relation".to_string());
        let file = File::open(path)?;
        Self::from_reader(name, file, join_column, delimiter)
    }

    pub fn from_reader<R: Read>(
        name: impl Into<String>,
        reader: R,
        join_column: &str,
        delimiter: u8,
    ) -> Result<Self> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyRelation(name));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect::<Vec<_>>());
        }
        if rows.is_empty() {
            return Err(Error::EmptyRelation(name));
        }
        let mut rel = Self::from_rows(name, header, join_column, rows)?;
        rel.delimiter = delimiter;
        Ok(rel)
    }

    /// Builds a relation from already-split rows. Rows whose join value is
    /// empty are dropped and counted in [`rejected_rows`](Self::rejected_rows).
    pub fn from_rows(
        name: impl Into<String>,
        header: Vec<String>,
        join_column: &str,
        rows: Vec<Vec<String>>,
    ) -> Result<Self> {
        let name = name.into();
        let col = header
            .iter()
            .position(|h| h == join_column)
            .ok_or_else(|| {
                Error::Schema(format!("relation `{name}` has no column `{join_column}`"))
            })?;

        let integer_keys = rows
            .iter()
            .map(|r| r[col].as_str())
            .filter(|v| !v.is_empty())
            .all(|v| v.parse::<i64>().is_ok());

        let mut tuples = Vec::with_capacity(rows.len());
        let mut rejected_rows = 0;
        for fields in rows {
            if fields.len() != header.len() {
                return Err(Error::Schema(format!(
                    "relation `{name}`: row has {} fields, header has {}",
                    fields.len(),
                    header.len()
                )));
            }
            let raw = fields[col].as_str();
            if raw.is_empty() {
                rejected_rows += 1;
                continue;
            }
            let key = if integer_keys {
                Key::Int(raw.parse().expect("sniffed as integer"))
            } else {
                Key::Str(raw.to_string())
            };
            tuples.push(Tuple {
                id: tuples.len(),
                key,
                fields,
                join_column: col,
            });
        }

        let mut rel = StratifiedRelation {
            name,
            header,
            join_column: col,
            delimiter: b',',
            tuples,
            index: BTreeMap::new(),
            positions: Vec::new(),
            rejected_rows,
        };
        rel.rebuild_index();
        Ok(rel)
    }

    /// Synthetic relation with the given per-key stratum sizes. Columns are
    /// `id` and `key`; rows are laid out stratum by stratum.
    pub fn from_strata<K: Into<Key> + Clone>(name: impl Into<String>, strata: &[(K, usize)]) -> Self {
        let header = vec!["id".to_string(), "key".to_string()];
        let mut tuples = Vec::new();
        for (key, count) in strata {
            let key: Key = key.clone().into();
            for _ in 0..*count {
                let id = tuples.len();
                tuples.push(Tuple {
                    id,
                    fields: vec![id.to_string(), key.to_string()],
                    key: key.clone(),
                    join_column: 1,
                });
            }
        }
        let mut rel = StratifiedRelation {
            name: name.into(),
            header,
            join_column: 1,
            delimiter: b',',
            tuples,
            index: BTreeMap::new(),
            positions: Vec::new(),
            rejected_rows: 0,
        };
        rel.rebuild_index();
        rel
    }

    fn rebuild_index(&mut self) {
        let mut index: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
        let mut positions = Vec::with_capacity(self.tuples.len());
        for t in &self.tuples {
            let bucket = index.entry(t.key.clone()).or_default();
            positions.push(bucket.len());
            bucket.push(t.id);
        }
        self.index = index;
        self.positions = positions;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn join_column(&self) -> &str {
        &self.header[self.join_column]
    }

    pub fn delimiter(&self) -> u8 {
        self.delimiter
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    /// Cardinality N.
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn tuple(&self, id: usize) -> &Tuple {
        &self.tuples[id]
    }

    pub fn index(&self) -> &BTreeMap<Key, Vec<usize>> {
        &self.index
    }

    /// Tuple ids of one stratum, in row order. Empty for absent keys.
    pub fn stratum(&self, key: &Key) -> &[usize] {
        self.index.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// m(a).
    pub fn count(&self, key: &Key) -> usize {
        self.stratum(key).len()
    }

    /// Position of a tuple within its stratum bucket.
    pub fn position_in_stratum(&self, id: usize) -> usize {
        self.positions[id]
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.index.keys()
    }

    pub fn strata_counts(&self) -> BTreeMap<Key, usize> {
        self.index.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    /// Rows dropped at ingestion because their join value was empty.
    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    /// Writes the relation in the format [`from_reader`](Self::from_reader) accepts.
    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .delimiter(self.delimiter)
            .from_writer(writer);
        wtr.write_record(&self.header)?;
        for t in &self.tuples {
            wtr.write_record(&t.fields)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn emit(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }
}

/// Per-stratum sizes of the two join inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StratumCounts {
    pub left: u64,
    pub right: u64,
}

impl StratumCounts {
    pub fn join_size(&self) -> u64 {
        self.left * self.right
    }

    pub fn is_common(&self) -> bool {
        self.left > 0 && self.right > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrataProfile {
    pub strata: BTreeMap<Key, StratumCounts>,
    pub left_total: u64,
    pub right_total: u64,
    pub join_cardinality: u64,
}

impl StrataProfile {
    /// Builds a profile straight from per-key counts; keys with both counts
    /// zero are skipped.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (Key, u64, u64)>,
    {
        let mut strata = BTreeMap::new();
        for (key, left, right) in counts {
            if left == 0 && right == 0 {
                continue;
            }
            let e: &mut StratumCounts = strata.entry(key).or_default();
            e.left += left;
            e.right += right;
        }
        let left_total = strata.values().map(|c| c.left).sum();
        let right_total = strata.values().map(|c| c.right).sum();
        let join_cardinality = strata.values().map(StratumCounts::join_size).sum();
        StrataProfile {
            strata,
            left_total,
            right_total,
            join_cardinality,
        }
    }

    pub fn get(&self, key: &Key) -> StratumCounts {
        self.strata.get(key).copied().unwrap_or_default()
    }

    /// Profile with the roles of the two relations exchanged.
    pub fn swapped(&self) -> Self {
        StrataProfile {
            strata: self
                .strata
                .iter()
                .map(|(k, c)| {
                    (
                        k.clone(),
                        StratumCounts {
                            left: c.right,
                            right: c.left,
                        },
                    )
                })
                .collect(),
            left_total: self.right_total,
            right_total: self.left_total,
            join_cardinality: self.join_cardinality,
        }
    }

    /// Iterator over strata present in both relations, in key order.
    pub fn common(&self) -> impl Iterator<Item = (&Key, StratumCounts)> {
        self.strata
            .iter()
            .filter(|(_, c)| c.is_common())
            .map(|(k, c)| (k, *c))
    }
}

pub fn profile(r1: &StratifiedRelation, r2: &StratifiedRelation) -> StrataProfile {
    let keys = r1.keys().chain(r2.keys()).cloned();
    let counts: Vec<(Key, u64, u64)> = {
        let mut seen = std::collections::BTreeSet::new();
        keys.filter(|k| seen.insert(k.clone()))
            .map(|k| {
                let l = r1.count(&k) as u64;
                let r = r2.count(&k) as u64;
                (k, l, r)
            })
            .collect()
    };
    StrataProfile::from_counts(counts)
}

/// Keys with a nonzero count in both relations, sorted.
pub fn common_strata(profile: &StrataProfile) -> Vec<Key> {
    profile.common().map(|(k, _)| k.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab(a: usize, b: usize) -> StratifiedRelation {
        StratifiedRelation::from_strata("r", &[("a", a), ("b", b)])
    }

    #[test]
    fn ingest_counts_strata() {
        let data = "id,k,v\n1,a,x\n2,a,y\n3,b,z\n";
        let rel = StratifiedRelation::from_reader("t", data.as_bytes(), "k", b',').unwrap();
        assert_eq!(rel.count(&Key::from("a")), 2);
        assert_eq!(rel.count(&Key::from("b")), 1);
        assert_eq!(rel.len(), 3);
        let payload: Vec<_> = rel.tuple(0).payload().collect();
        assert_eq!(payload, vec!["1", "x"]);
    }

    #[test]
    fn motivating_relation() {
        let mut data = String::from("rid,key\n0,1\n");
        for i in 1..100 {
            data.push_str(&format!("{i},2\n"));
        }
        let rel = StratifiedRelation::from_reader("r1", data.as_bytes(), "key", b',').unwrap();
        assert_eq!(rel.count(&Key::Int(1)), 1);
        assert_eq!(rel.count(&Key::Int(2)), 99);
    }

    #[test]
    fn integer_sniffing_falls_back_to_strings() {
        let data = "k\n1\n2\nx\n";
        let rel = StratifiedRelation::from_reader("t", data.as_bytes(), "k", b',').unwrap();
        assert!(rel.keys().all(|k| matches!(k, Key::Str(_))));
        let data = "k\n1\n-2\n\n";
        let rel = StratifiedRelation::from_reader("t", data.as_bytes(), "k", b',').unwrap();
        assert!(rel.keys().all(|k| matches!(k, Key::Int(_))));
    }

    #[test]
    fn null_join_values_are_rejected_and_counted() {
        let data = "id;k\n1;a\n2;\n3;b\n4;\n";
        let rel = StratifiedRelation::from_reader("t", data.as_bytes(), "k", b';').unwrap();
        assert_eq!(rel.len(), 2);
        assert_eq!(rel.rejected_rows(), 2);
        assert_eq!(rel.tuple(1).fields, vec!["3", "b"]);
    }

    #[test]
    fn schema_and_empty_errors() {
        let err = StratifiedRelation::from_reader("t", "a,b\n1,2\n".as_bytes(), "k", b',');
        assert!(matches!(err, Err(Error::Schema(_))));
        let err = StratifiedRelation::from_reader("t", "".as_bytes(), "k", b',');
        assert!(matches!(err, Err(Error::EmptyRelation(_))));
        let err = StratifiedRelation::from_reader("t", "k\n".as_bytes(), "k", b',');
        assert!(matches!(err, Err(Error::EmptyRelation(_))));
    }

    #[test]
    fn emit_round_trips() {
        let data = "id|k|note\n1|7|\"a|b\"\n2|007|x\n";
        let rel = StratifiedRelation::from_reader("t", data.as_bytes(), "k", b'|').unwrap();
        let mut out = Vec::new();
        rel.write_to(&mut out).unwrap();
        let back = StratifiedRelation::from_reader("t", out.as_slice(), "k", b'|').unwrap();
        assert_eq!(back.tuples(), rel.tuples());
        assert_eq!(back.strata_counts(), rel.strata_counts());
    }

    #[test]
    fn profile_worked_example() {
        let p = profile(&ab(2, 5), &ab(3, 3));
        assert_eq!(p.join_cardinality, 21);
        assert_eq!(common_strata(&p), vec![Key::from("a"), Key::from("b")]);
    }

    #[test]
    fn profile_disjoint_and_motivating() {
        let r1 = StratifiedRelation::from_strata("r1", &[("a", 1)]);
        let r2 = StratifiedRelation::from_strata("r2", &[("b", 1)]);
        let p = profile(&r1, &r2);
        assert_eq!(p.join_cardinality, 0);
        assert!(common_strata(&p).is_empty());
        assert_eq!(p.strata.len(), 2);

        let r1 = StratifiedRelation::from_strata("r1", &[(1i64, 1), (2, 99)]);
        let r2 = StratifiedRelation::from_strata("r2", &[(2i64, 1), (1, 99)]);
        assert_eq!(profile(&r1, &r2).join_cardinality, 198);
    }

    #[test]
    fn index_matches_full_scan() {
        let r = StratifiedRelation::from_strata("r", &[("x", 3), ("y", 2), ("z", 4)]);
        for key in r.keys() {
            let scan: Vec<usize> = r.tuples().iter().filter(|t| &t.key == key).map(|t| t.id).collect();
            assert_eq!(r.stratum(key), scan.as_slice());
            for (pos, id) in scan.iter().enumerate() {
                assert_eq!(r.position_in_stratum(*id), pos);
            }
        }
    }
}
