//! The `stratjoin` command line.
//!
//! Every command writes to `--out` when given and to stdout otherwise.
//! Failures print `{"error": <kind>, "message": <text>}` on stderr and exit
//! nonzero.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::allocation::{
    allocate_multi_strata, brute_force_optimal, count_possible_samples, uniformity_confidence,
    AllocationPlan, StrataMatrix,
};
use crate::datagen::{generate, ZipfSpec};
use crate::error::{Error, Result};
use crate::join::{plan_overall, JoinAlgorithm, SamplingRate};
use crate::report::{
    bench_relations, run_bench, write_report, ExperimentConfig, Format, ReportRow, Sig6,
};
use crate::sampler::RngHandle;
use crate::strata::{profile, Key, StratifiedRelation};
use crate::verify::{
    check_multinomial, check_strs1, check_strs2, check_strs3, fixtures, run_trials, TestReport,
    DEFAULT_ALPHA, NEGATIVE_CONTROLS,
};

#[derive(Debug, Parser)]
#[command(name = "stratjoin", version, about = "Stratified random sampling over equi-joins")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format: json or csv.
    #[arg(long, global = true, default_value = "json")]
    pub format: String,

    /// Field delimiter of delimited input and output (a single character or `tab`).
    #[arg(long, global = true, default_value = ",")]
    pub delim: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Left relation (the foreign-key side for the 1:N algorithms).
    #[arg(long)]
    pub left: PathBuf,
    /// Right relation.
    #[arg(long)]
    pub right: PathBuf,
    /// Name of the join column in both relations.
    #[arg(long = "join-col")]
    pub join_col: String,
}

#[derive(Debug, Args)]
pub struct Rates {
    /// Join sampling rate in (0, 1]; repeatable.
    #[arg(short = 'f', long = "rate", required = true)]
    pub rates: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a relation with Zipf-distributed join keys.
    Gen {
        #[arg(long)]
        tuples: u64,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
        #[arg(long)]
        keys: u64,
    },
    /// Per-stratum sizes of two relations and their join.
    Stats {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Run one sampling algorithm.
    Sample {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        algo: String,
        #[arg(short = 'f', long = "rate")]
        rate: f64,
    },
    /// Per-stratum plan of the inflation-aware algorithm.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(short = 'f', long = "rate")]
        rate: f64,
    },
    /// Allocate a sample budget over a strata matrix (rows are relations).
    Allocate {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(short = 'k', long)]
        budget: u64,
        /// Also search for the optimal allocation.
        #[arg(long)]
        optimal: bool,
    },
    /// Uniformity Confidence of a plan given as JSON cells `[[..], ..]`.
    Uc {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        plan: String,
    },
    /// Randomness checks on the built-in fixtures.
    Verify {
        #[arg(long, default_value_t = 40_000)]
        trials: u64,
        /// Restrict to these fixtures; repeatable.
        #[arg(long)]
        fixture: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Sample-size accounts of several algorithms and rates.
    Bench {
        /// Left and right relation files; generated data is used when absent.
        #[arg(long, requires = "right")]
        left: Option<PathBuf>,
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
        #[arg(long = "join-col", default_value = "JoinKey")]
        join_col: String,
        #[command(flatten)]
        rates: Rates,
        /// Algorithm name; repeatable. All of them when absent.
        #[arg(long)]
        algo: Vec<String>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value_t = 10_000)]
        tuples: u64,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
        #[arg(long, default_value_t = 100)]
        keys: u64,
        /// Record mean wall-clock time per run.
        #[arg(long)]
        timings: bool,
    },
    /// Run an experiment described by a JSON config.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        timings: bool,
    },
}

fn delimiter(s: &str) -> Result<u8> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(Error::Config(format!("delimiter must be one ASCII character, got `{s}`"))),
    }
}

fn rate(f: f64) -> Result<SamplingRate> {
    SamplingRate::new(f)
}

fn load(inputs: &Inputs, delim: u8) -> Result<(StratifiedRelation, StratifiedRelation)> {
    Ok((
        StratifiedRelation::ingest(&inputs.left, &inputs.join_col, delim)?,
        StratifiedRelation::ingest(&inputs.right, &inputs.join_col, delim)?,
    ))
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize)]
struct StratumRow {
    key: Key,
    left: u64,
    right: u64,
    join: u64,
}

#[derive(Serialize)]
struct StatsDoc {
    left: RelationSummary,
    right: RelationSummary,
    join_cardinality: u64,
    common_strata: usize,
    strata: Vec<StratumRow>,
}

#[derive(Serialize)]
struct RelationSummary {
    name: String,
    tuples: usize,
    strata: usize,
    rejected_rows: usize,
}

impl RelationSummary {
    fn of(r: &StratifiedRelation) -> Self {
        RelationSummary {
            name: r.name().to_string(),
            tuples: r.len(),
            strata: r.index().len(),
            rejected_rows: r.rejected_rows(),
        }
    }
}

#[derive(Serialize)]
struct AllocationDoc {
    k: u64,
    plan: AllocationPlan,
    possible_samples: String,
    log_possible_samples: Sig6,
    uniformity_confidence: Sig6,
    optimal: Option<OptimalDoc>,
}

#[derive(Serialize)]
struct OptimalDoc {
    plan: AllocationPlan,
    possible_samples: String,
    log_possible_samples: Sig6,
    uniformity_confidence: Sig6,
}

#[derive(Serialize)]
struct VerifyRow {
    fixture: String,
    subject: String,
    criterion: String,
    statistic: Option<Sig6>,
    df: Option<usize>,
    p_value: Option<Sig6>,
    pass: bool,
    /// Whether the row is a negative control, expected to fail.
    control: bool,
    note: String,
}

impl VerifyRow {
    fn from(fixture: &str, subject: &str, control: bool, criterion: &str, r: Result<TestReport>) -> Self {
        match r {
            Ok(r) => VerifyRow {
                fixture: fixture.to_string(),
                subject: subject.to_string(),
                criterion: r.criterion,
                statistic: Some(Sig6::new(r.statistic)),
                df: Some(r.df),
                p_value: Some(Sig6::new(r.p_value)),
                pass: r.pass,
                control,
                note: r.note,
            },
            Err(e) => VerifyRow {
                fixture: fixture.to_string(),
                subject: subject.to_string(),
                criterion: criterion.to_string(),
                statistic: None,
                df: None,
                p_value: None,
                pass: false,
                control,
                note: format!("{}: {e}", e.kind()),
            },
        }
    }
}

fn verify(trials: u64, only: &[String], seed: u64, alpha: f64) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for fx in fixtures() {
        if !only.is_empty() && !only.iter().any(|n| n == fx.name) {
            continue;
        }
        let p = profile(&fx.left, &fx.right);
        for alg in fx.stratified() {
            let targets = alg.output_targets(&p, fx.f).expect("stratified");
            let stats = run_trials(alg, &fx.left, &fx.right, fx.f, trials, seed);
            let name = alg.name();
            match stats {
                Ok(stats) => {
                    rows.push(VerifyRow::from(fx.name, name, false, "StRS_1", Ok(check_strs1(&stats, &targets))));
                    rows.push(VerifyRow::from(fx.name, name, false, "StRS_2", check_strs2(&stats, alpha)));
                    rows.push(VerifyRow::from(fx.name, name, false, "StRS_3", check_strs3(&stats, alpha)));
                }
                Err(e) => rows.push(VerifyRow::from(fx.name, name, false, "trials", Err(e))),
            }
        }
        for alg in fx.srs() {
            let r = run_trials(alg, &fx.left, &fx.right, fx.f, trials, seed)
                .and_then(|stats| check_multinomial(&stats, &p, alpha));
            rows.push(VerifyRow::from(fx.name, alg.name(), false, "multinomial", r));
        }
    }
    if only.is_empty() {
        for c in NEGATIVE_CONTROLS {
            let r = c.run(trials, seed, alpha);
            rows.push(VerifyRow::from("control", c.name(), true, "control", r));
        }
    }
    Ok(rows)
}

fn verify_table(rows: &[VerifyRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:<26} {:<12} {:>12}  result", "fixture", "subject", "criterion", "p-value");
    for r in rows {
        let verdict = match (r.pass, r.control) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "PASS (rejected)",
            (true, true) => "FAIL (accepted)",
        };
        let p = r.p_value.map_or("-".to_string(), |p| p.to_string());
        let _ = writeln!(s, "{:<12} {:<26} {:<12} {:>12}  {verdict}", r.fixture, r.subject, r.criterion, p);
    }
    s
}

fn parse_algorithms(names: &[String]) -> Result<Vec<JoinAlgorithm>> {
    if names.is_empty() {
        return Ok(JoinAlgorithm::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn report_bytes(rows: &[ReportRow], format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_report(rows, format, &mut out)?;
    Ok(out)
}

/// Executes a parsed command and returns the bytes it outputs.
pub fn execute(cli: &Cli) -> Result<Vec<u8>> {
    let delim = delimiter(&cli.delim)?;
    let format: Format = cli.format.parse()?;
    match &cli.command {
        Command::Gen { tuples, z, keys } => {
            let spec = ZipfSpec { n_tuples: *tuples, z: *z, n_keys: *keys, seed: cli.seed };
            let name = cli
                .out
                .as_ref()
                .and_then(|p| p.file_stem())
                .map_or("zipf".to_string(), |s| s.to_string_lossy().into_owned());
            let rel = generate(&name, &spec)?.with_delimiter(delim);
            let mut out = Vec::new();
            rel.write_to(&mut out)?;
            Ok(out)
        }
        Command::Stats { inputs } => {
            let (l, r) = load(inputs, delim)?;
            let p = profile(&l, &r);
            let doc = StatsDoc {
                left: RelationSummary::of(&l),
                right: RelationSummary::of(&r),
                join_cardinality: p.join_cardinality,
                common_strata: p.common().count(),
                strata: p
                    .strata
                    .iter()
                    .map(|(k, c)| StratumRow { key: k.clone(), left: c.left, right: c.right, join: c.join_size() })
                    .collect(),
            };
            json(&doc)
        }
        Command::Sample { inputs, algo, rate: f } => {
            let (l, r) = load(inputs, delim)?;
            let algorithm: JoinAlgorithm = algo.parse()?;
            let run = algorithm.run(&l, &r, rate(*f)?, &RngHandle::new(cli.seed))?;
            match format {
                Format::Json => {
                    #[derive(Serialize)]
                    struct Doc<'a> {
                        algorithm: JoinAlgorithm,
                        rate: f64,
                        seed: u64,
                        account: &'a crate::join::SizeAccount,
                        counts: Vec<(Key, usize)>,
                        tuples: Vec<&'a crate::mini_join::JoinedTuple>,
                    }
                    json(&Doc {
                        algorithm,
                        rate: *f,
                        seed: cli.seed,
                        account: &run.account,
                        counts: run.sample.counts().into_iter().collect(),
                        tuples: run.sample.iter().collect(),
                    })
                }
                Format::Csv => {
                    let mut w = csv::WriterBuilder::new().delimiter(delim).from_writer(Vec::new());
                    let mut header = l.header().to_vec();
                    header.extend(
                        r.header()
                            .iter()
                            .filter(|h| h.as_str() != r.join_column())
                            .cloned(),
                    );
                    w.write_record(&header)?;
                    for t in run.sample.iter() {
                        w.write_record(t.payload(&l, &r))?;
                    }
                    w.into_inner().map_err(|e| Error::Io(e.into_error()))
                }
            }
        }
        Command::Plan { inputs, rate: f } => {
            let (l, r) = load(inputs, delim)?;
            let plan = plan_overall(&profile(&l, &r), rate(*f)?);
            #[derive(Serialize)]
            struct Doc<'a> {
                plan: &'a crate::join::SamplePlan,
                account: crate::join::SizeAccount,
                fraction_sampled: f64,
            }
            json(&Doc { plan: &plan, account: plan.account(), fraction_sampled: plan.fraction_sampled() })
        }
        Command::Allocate { matrix, budget, optimal } => {
            let m = StrataMatrix::load(matrix, delim)?;
            let plan = allocate_multi_strata(&m, *budget)?;
            let count = count_possible_samples(&m, &plan)?;
            let show = |c: &crate::allocation::SampleCount| {
                c.exact.as_ref().map_or("unavailable".to_string(), |e| e.to_string())
            };
            let best = if *optimal {
                let (p, c) = brute_force_optimal(&m, *budget)?;
                Some(OptimalDoc {
                    uniformity_confidence: Sig6::new(uniformity_confidence(&m, &p)?),
                    possible_samples: show(&c),
                    log_possible_samples: Sig6::new(c.log_value),
                    plan: p,
                })
            } else {
                None
            };
            json(&AllocationDoc {
                k: *budget,
                uniformity_confidence: Sig6::new(uniformity_confidence(&m, &plan)?),
                possible_samples: show(&count),
                log_possible_samples: Sig6::new(count.log_value),
                plan,
                optimal: best,
            })
        }
        Command::Uc { matrix, plan } => {
            let m = StrataMatrix::load(matrix, delim)?;
            let cells: Vec<Vec<u64>> = serde_json::from_str(plan)?;
            let plan = AllocationPlan::from_cells(cells);
            let uc = uniformity_confidence(&m, &plan)?;
            #[derive(Serialize)]
            struct Doc {
                k: u64,
                uniformity_confidence: Sig6,
            }
            json(&Doc { k: plan.k, uniformity_confidence: Sig6::new(uc) })
        }
        Command::Verify { trials, fixture, alpha } => {
            let rows = verify(*trials, fixture, cli.seed, *alpha)?;
            match format {
                Format::Json => json(&rows),
                Format::Csv => Ok(verify_table(&rows).into_bytes()),
            }
        }
        Command::Bench { left, right, join_col, rates, algo, trials, tuples, z, keys, timings } => {
            let config = ExperimentConfig {
                algorithms: parse_algorithms(algo)?,
                rates: rates.rates.iter().map(|&f| rate(f)).collect::<Result<_>>()?,
                datasets: Vec::new(),
                trials: *trials,
                seed: cli.seed,
                timings: *timings,
                out: cli.out.clone(),
            };
            config.validate()?;
            let (l, r, name) = match (left, right) {
                (Some(lp), Some(rp)) => (
                    StratifiedRelation::ingest(lp, join_col, delim)?,
                    StratifiedRelation::ingest(rp, join_col, delim)?,
                    "files".to_string(),
                ),
                _ => {
                    let spec = |seed| ZipfSpec { n_tuples: *tuples, z: *z, n_keys: *keys, seed };
                    (
                        generate("left", &spec(cli.seed))?,
                        generate("right", &spec(cli.seed.wrapping_add(1)))?,
                        format!("zipf-z{z}-n{tuples}-k{keys}"),
                    )
                }
            };
            report_bytes(&bench_relations(&config, &name, &l, &r)?, format)
        }
        Command::Report { config, timings } => {
            let mut cfg = ExperimentConfig::load(config)?;
            cfg.timings |= *timings;
            report_bytes(&run_bench(&cfg)?, format)
        }
    }
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: &'a str,
    message: String,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let doc = ErrorDoc { error: kind, message };
    eprintln!("{}", serde_json::to_string(&doc).expect("error doc serializes"));
    ExitCode::from(code)
}

/// Parses `args`, runs the command and writes its output.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    let bytes = match execute(&cli) {
        Ok(b) => b,
        Err(e) => return fail(e.kind(), e.to_string(), 1),
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("io", e.to_string(), 1),
    }
}
