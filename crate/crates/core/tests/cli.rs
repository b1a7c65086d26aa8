use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stratjoin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratjoin"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("l.csv"), "JoinKey,v\n1,a\n1,b\n2,c\n").unwrap();
    std::fs::write(dir.path().join("r.csv"), "JoinKey,w\n1,x\n2,y\n2,z\n3,q\n").unwrap();
    std::fs::write(dir.path().join("m.json"), "[[3,3],[4,2]]").unwrap();
    dir
}

const INPUTS: [&str; 6] = ["--left", "l.csv", "--right", "r.csv", "--join-col", "JoinKey"];

#[test]
fn stats_reports_join_cardinality() {
    let dir = fixture();
    let mut args = vec!["stats"];
    args.extend(INPUTS);
    let doc = stdout_json(&stratjoin(dir.path(), &args));
    assert_eq!(doc["join_cardinality"], 4);
    assert_eq!(doc["common_strata"], 2);
}

#[test]
fn plan_picks_the_larger_side() {
    let dir = fixture();
    let mut args = vec!["plan", "-f", "0.5"];
    args.extend(INPUTS);
    let doc = stdout_json(&stratjoin(dir.path(), &args));
    let strata = doc["plan"]["strata"].as_array().unwrap();
    assert_eq!(strata[0]["strategy"], "SAMPLE_LEFT");
    assert_eq!(strata[1]["strategy"], "SAMPLE_RIGHT");
    assert_eq!(doc["account"]["left"], 2);
    assert_eq!(doc["account"]["right"], 2);
    assert_eq!(doc["account"]["baseline"], 7);
}

#[test]
fn sample_outputs_one_tuple_per_stratum() {
    let dir = fixture();
    let mut args = vec!["sample", "--algo", "stratjoin-overall", "-f", "0.5"];
    args.extend(INPUTS);
    let doc = stdout_json(&stratjoin(dir.path(), &args));
    assert_eq!(doc["counts"], serde_json::json!([[1, 1], [2, 1]]));
    assert_eq!(doc["tuples"].as_array().unwrap().len(), 2);
}

#[test]
fn sample_csv_is_seeded() {
    let dir = fixture();
    let run = |seed: &str| {
        let mut args = vec!["sample", "--algo", "srs-both", "-f", "0.5", "--format", "csv", "--seed", seed];
        args.extend(INPUTS);
        let out = stratjoin(dir.path(), &args);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("7"), run("7"));
    let text = String::from_utf8(run("7")).unwrap();
    assert!(text.starts_with("JoinKey,v,w"), "{text}");
}

#[test]
fn allocate_with_optimum() {
    let dir = fixture();
    let doc = stdout_json(&stratjoin(dir.path(), &["allocate", "--matrix", "m.json", "-k", "6", "--optimal"]));
    assert_eq!(doc["plan"]["k_j"], serde_json::json!([3, 3]));
    assert_eq!(doc["possible_samples"], "108");
    assert_eq!(doc["optimal"]["possible_samples"], "108");
}

#[test]
fn gen_writes_to_out() {
    let dir = fixture();
    let out = stratjoin(dir.path(), &["gen", "--tuples", "50", "--keys", "5", "--z", "1.0", "--out", "g.csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn missing_arguments_are_usage_errors() {
    let dir = fixture();
    let out = stratjoin(dir.path(), &["sample", "--left", "l.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
    assert!(out.stdout.is_empty());
}

#[test]
fn help_exits_cleanly() {
    let out = stratjoin(Path::new("."), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("allocate"));
}

#[test]
fn library_errors_carry_their_kind() {
    let dir = fixture();
    let cases: [(&[&str], &str); 4] = [
        (&["sample", "--algo", "nope", "-f", "0.5"], "config"),
        (&["sample", "--algo", "srs-both", "-f", "1.5"], "invalid_rate"),
        (&["sample", "--algo", "stratjoin-1n", "-f", "0.5"], "constraint"),
        (&["plan", "-f", "0.5", "--delim", "ab"], "config"),
    ];
    for (head, kind) in cases {
        let mut args = head.to_vec();
        args.extend(INPUTS);
        let out = stratjoin(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], kind, "{args:?}: {err}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }

    let out = stratjoin(dir.path(), &["stats", "--left", "l.csv", "--right", "gone.csv", "--join-col", "JoinKey"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn unknown_join_column_is_a_schema_error() {
    let dir = fixture();
    let out = stratjoin(dir.path(), &["stats", "--left", "l.csv", "--right", "r.csv", "--join-col", "Nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "schema");
}
