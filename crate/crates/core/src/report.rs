//! Benchmark runs over join-sampling algorithms and their reports.
//!
//! Reports are byte-stable: numbers are written as decimal strings with six
//! significant digits and wall-clock time is left out unless asked for.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datagen::{generate, ZipfSpec};
use crate::error::{Error, Result};
use crate::join::{expected_account, JoinAlgorithm, SamplingRate, SizeAccount};
use crate::sampler::RngHandle;
use crate::strata::{profile, StrataProfile, StratifiedRelation};

pub const SCHEMA_VERSION: u32 = 1;

/// Joins whose output exceeds this many tuples are planned, not executed.
pub const EXECUTION_LIMIT: u64 = 2_000_000;

/// A real number written with six significant digits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Sig6(pub f64);

impl Sig6 {
    pub fn new(v: f64) -> Self {
        Sig6(round_sig6(v))
    }
}

fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

impl fmt::Display for Sig6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", round_sig6(self.0))
    }
}

impl Serialize for Sig6 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sig6 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<f64>().map(Sig6::new).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Zipf(ZipfSpec),
    File {
        path: PathBuf,
        join_column: String,
        #[serde(default)]
        delimiter: Option<char>,
    },
}

impl DatasetSource {
    pub fn load(&self, name: &str) -> Result<StratifiedRelation> {
        match self {
            DatasetSource::Zipf(spec) => generate(name, spec),
            DatasetSource::File { path, join_column, delimiter } => {
                let d = delimiter.unwrap_or(',');
                if !d.is_ascii() {
                    return Err(Error::Config(format!("delimiter `{d}` is not ASCII")));
                }
                StratifiedRelation::ingest(path, join_column, d as u8)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub left: DatasetSource,
    pub right: DatasetSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithms: Vec<JoinAlgorithm>,
    pub rates: Vec<SamplingRate>,
    pub datasets: Vec<Dataset>,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> u64 {
    1
}

fn default_seed() -> u64 {
    42
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms given".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::Config("no sampling rates given".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub algorithm: JoinAlgorithm,
    pub f: Sig6,
    pub left_sample: Option<u64>,
    pub right_sample: Option<u64>,
    pub account_total: Option<u64>,
    /// Account over |R1| + |R2|.
    pub ratio_to_relations: Option<Sig6>,
    /// Account over the inflation-aware algorithm's account.
    pub ratio_to_overall: Option<Sig6>,
    /// Share of joining strata where fewer tuples than the stratum enter the
    /// join.
    pub fraction_strata_sampled: Option<Sig6>,
    /// Share of runs in which at least one stratum was sampled.
    pub runs_with_sampled_stratum: Option<Sig6>,
    pub executed: bool,
    /// Mean seconds per run; only filled in when timings are requested.
    pub runtime_s: Option<Sig6>,
    pub error: Option<String>,
}

fn sampled_fraction(account: &SizeAccount, profile: &StrataProfile) -> f64 {
    let common: Vec<_> = profile.common().collect();
    if common.is_empty() {
        return 0.0;
    }
    let sampled = common
        .iter()
        .filter(|(k, c)| {
            // SRS accounts hold expectations per stratum; a stratum counts
            // as sampled when a side is charged less than in full.
            account
                .stratum(k)
                .is_some_and(|s| s.left < c.left as f64 || s.right < c.right as f64)
        })
        .count();
    sampled as f64 / common.len() as f64
}

fn bench_cell(
    algorithm: JoinAlgorithm,
    left: &StratifiedRelation,
    right: &StratifiedRelation,
    p: &StrataProfile,
    f: SamplingRate,
    overall_total: Option<u64>,
    config: &ExperimentConfig,
    dataset: &str,
) -> ReportRow {
    let mut row = ReportRow {
        dataset: dataset.to_string(),
        algorithm,
        f: Sig6::new(f.get()),
        left_sample: None,
        right_sample: None,
        account_total: None,
        ratio_to_relations: None,
        ratio_to_overall: None,
        fraction_strata_sampled: None,
        runs_with_sampled_stratum: None,
        executed: false,
        runtime_s: None,
        error: None,
    };
    let planned = match expected_account(algorithm, p, f) {
        Ok(a) => a,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let execute = algorithm.output_size(p, f) <= EXECUTION_LIMIT;
    let root = RngHandle::new(config.seed);
    let mut account = planned;
    let mut runs_sampled = 0u64;
    let mut elapsed = 0.0;
    let runs = if execute { config.trials } else { 1 };
    for t in 0..runs {
        if execute {
            let start = Instant::now();
            match algorithm.run(left, right, f, &root.trial(t)) {
                Ok(run) => account = run.account,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            }
            elapsed += start.elapsed().as_secs_f64();
        }
        if sampled_fraction(&account, p) > 0.0 {
            runs_sampled += 1;
        }
    }
    let baseline = account.baseline as f64;
    row.left_sample = Some(account.left);
    row.right_sample = Some(account.right);
    row.account_total = Some(account.total());
    row.ratio_to_relations = (baseline > 0.0).then(|| Sig6::new(account.total() as f64 / baseline));
    row.ratio_to_overall = overall_total
        .filter(|&o| o > 0)
        .map(|o| Sig6::new(account.total() as f64 / o as f64));
    row.fraction_strata_sampled = Some(Sig6::new(sampled_fraction(&account, p)));
    row.runs_with_sampled_stratum = Some(Sig6::new(runs_sampled as f64 / runs as f64));
    row.executed = execute;
    if config.timings && execute {
        row.runtime_s = Some(Sig6::new(elapsed / runs as f64));
    }
    row
}

/// One row per (dataset, rate, algorithm), in configuration order.
pub fn run_bench(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for ds in &config.datasets {
        let loaded = ds
            .left
            .load(&format!("{}-left", ds.name))
            .and_then(|l| Ok((l, ds.right.load(&format!("{}-right", ds.name))?)));
        let (left, right) = match loaded {
            Ok(pair) => pair,
            Err(e) => {
                for &f in &config.rates {
                    for &algorithm in &config.algorithms {
                        rows.push(failed_row(&ds.name, algorithm, f, &e));
                    }
                }
                continue;
            }
        };
        rows.extend(bench_relations(config, &ds.name, &left, &right)?);
    }
    Ok(rows)
}

fn failed_row(dataset: &str, algorithm: JoinAlgorithm, f: SamplingRate, e: &Error) -> ReportRow {
    ReportRow {
        dataset: dataset.to_string(),
        algorithm,
        f: Sig6::new(f.get()),
        left_sample: None,
        right_sample: None,
        account_total: None,
        ratio_to_relations: None,
        ratio_to_overall: None,
        fraction_strata_sampled: None,
        runs_with_sampled_stratum: None,
        executed: false,
        runtime_s: None,
        error: Some(e.to_string()),
    }
}

/// Bench rows for one already loaded relation pair.
pub fn bench_relations(
    config: &ExperimentConfig,
    dataset: &str,
    left: &StratifiedRelation,
    right: &StratifiedRelation,
) -> Result<Vec<ReportRow>> {
    let p = profile(left, right);
    let mut rows = Vec::new();
    for &f in &config.rates {
        let overall = expected_account(JoinAlgorithm::StratJoinOverall, &p, f)?.total();
        for &algorithm in &config.algorithms {
            rows.push(bench_cell(algorithm, left, right, &p, f, Some(overall), config, dataset));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    schema_version: u32,
    rows: Vec<ReportRow>,
}

pub fn write_report<W: Write>(rows: &[ReportRow], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => {
            let doc = ReportDoc {
                schema_version: SCHEMA_VERSION,
                rows: rows.to_vec(),
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report(rows: &[ReportRow], format: Format, path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("nothing to report".into()));
    }
    let file = std::fs::File::create(path)?;
    write_report(rows, format, std::io::BufWriter::new(file))
}

pub fn read_report_json(text: &str) -> Result<(u32, Vec<ReportRow>)> {
    let doc: ReportDoc = serde_json::from_str(text)?;
    Ok((doc.schema_version, doc.rows))
}

pub fn read_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
