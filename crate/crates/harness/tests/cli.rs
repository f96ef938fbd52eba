use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfgmaster::{emit_csv, read_csv, Record};
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfgmaster"))
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn model(n_x: usize, n_t: usize, f: &[f64], g: &[f64]) -> Value {
    json!({
        "n_x": n_x, "n_t": n_t, "T": 1.0,
        "a": {"kind": "constant", "value": 1.0},
        "hamiltonian": {"kind": "sqrt1p"},
        "F": {"cos_coeffs": f},
        "G": {"cos_coeffs": g},
    })
}

fn metric(records: &[Record], parameter: &str, name: &str) -> f64 {
    records
        .iter()
        .find(|r| r.parameter == parameter && r.metric == name)
        .unwrap_or_else(|| panic!("no {parameter}/{name} in {records:?}"))
        .value
}

#[test]
fn duality_on_small_grid_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "duality.json",
        &json!({"model": model(21, 21, &[0.5, 0.3], &[0.5, 0.3]), "seed": 3, "kind": "duality"}),
    );
    let out = dir.path().join("out");
    let res = run(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let records = read_csv(&out.join("results.csv")).unwrap();
    let defects: Vec<f64> = records.iter().filter(|r| r.metric.contains("defect")).map(|r| r.value).collect();
    assert!(!defects.is_empty());
    assert!(defects.iter().all(|d| *d <= 1e-10), "{defects:?}");
    let diag: Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["seed"], json!(3));
}

#[test]
fn decoupled_solve_needs_one_iteration() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "decoupled.json",
        &json!({"model": model(21, 41, &[0.0], &[0.0]), "kind": "mfg-solve"}),
    );
    let out = dir.path().join("out");
    let res = run(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let records = read_csv(&out.join("results.csv")).unwrap();
    assert_eq!(metric(&records, "picard", "iterations"), 1.0);
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &json!({"kind": "unknown"}));
    let res = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_parameter_and_missing_file_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &json!({"kind": "duality", "params": {"tupels": 3}}));
    assert_eq!(run(&cfg, &dir.path().join("out"), &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&missing, &dir.path().join("out"), &[]).status.code(), Some(2));
    let no_out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(no_out.status.code(), Some(2));
}

#[test]
fn failing_assertion_exits_one_and_lists_the_metric() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "strict.json",
        &json!({
            "model": model(21, 41, &[0.5, 0.3], &[0.5, 0.3]),
            "kind": "mfg-solve",
            "params": {"max_iter": 2, "compare_initializations": false},
        }),
    );
    let res = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("FAIL") && stdout.contains("final_gap"), "{stdout}");
}

#[test]
fn identical_runs_give_identical_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "twice.json",
        &json!({"model": model(21, 41, &[0.5, 0.3], &[0.5, 0.3]), "seed": 11, "experiments": [
            {"kind": "duality", "name": "d"},
            {"kind": "monotonicity", "name": "mono", "params": {"pairs": 2}},
        ]}),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &["--jobs", "2"]).status.code(), Some(0));
    let (ra, rb) = (fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
    assert_eq!(ra, rb);
    let c = dir.path().join("c");
    assert_eq!(run(&cfg, &c, &["--seed", "12"]).status.code(), Some(0));
    assert_ne!(ra, fs::read(c.join("results.csv")).unwrap());
}

#[test]
fn multi_experiment_config_keeps_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "multi.json",
        &json!({"model": model(21, 41, &[0.5, 0.3], &[0.5, 0.3]), "experiments": [
            {"kind": "duality", "name": "first"},
            {"kind": "mfg-solve", "name": "second"},
            {"kind": "duality", "name": "third", "params": {"tuples": 3}},
        ]}),
    );
    let out = dir.path().join("out");
    let res = run(&cfg, &out, &["--jobs", "3"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let records = read_csv(&out.join("results.csv")).unwrap();
    let mut order: Vec<&str> = records.iter().map(|r| r.experiment.as_str()).collect();
    order.dedup();
    assert_eq!(order, ["first", "second", "third"]);
}

#[test]
fn validate_reports_the_hypotheses() {
    let dir = TempDir::new().unwrap();
    let good = write_config(dir.path(), "good.json", &json!({"model": model(21, 41, &[0.5, 0.3], &[0.5, 0.3]), "kind": "duality"}));
    let res = bin().arg("validate").arg("--config").arg(&good).arg("--pairs").arg("5").output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let bad = write_config(dir.path(), "bad.json", &json!({"model": model(21, 41, &[0.5, -0.3], &[0.5, 0.3]), "kind": "duality"}));
    let res = bin().arg("validate").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stdout));
}

#[test]
fn csv_layout() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    emit_csv(&[], &empty).unwrap();
    assert_eq!(fs::read_to_string(&empty).unwrap(), "experiment,parameter,metric,value\n");

    let one = dir.path().join("one.csv");
    let record = Record {
        experiment: "e".into(),
        parameter: "p".into(),
        metric: "m".into(),
        value: 0.1,
    };
    emit_csv(std::slice::from_ref(&record), &one).unwrap();
    let text = fs::read_to_string(&one).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().nth(1).unwrap(), "e,p,m,1.0000000000000001e-1");

    let records: Vec<Record> = (0..20)
        .map(|i| Record {
            experiment: format!("exp,{i}"),
            parameter: "x\"y".into(),
            metric: "v".into(),
            value: (i as f64).exp() * if i % 2 == 0 { 1.0 } else { -1e-300 },
        })
        .collect();
    let path = dir.path().join("round.csv");
    emit_csv(&records, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), records);
}
