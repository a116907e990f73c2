use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const QUICK: &str = r#"{"sampler": {"sample_count": 500}, "grid": {"nodes": [41]}"#;

fn bqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, format!("{QUICK}{extra}}}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn default_run_writes_report_and_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let o = bqm(&["all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    for name in ["report.json", "barrier_z.csv", "barrier_w.csv", "solution.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let csv = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,u1_1,u2_1"));
    assert_eq!(csv.lines().count(), 42);
    let r = report(&out);
    assert_eq!(r["classification"]["verdict"], "solution");
    assert_eq!(r["stages"].as_array().unwrap().len(), 7);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("out");
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        assert_eq!(bqm(&["all", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]).status.code(), Some(0));
        let files: Vec<Vec<u8>> = ["report.json", "barrier_z.csv", "barrier_w.csv", "solution.csv"]
            .iter()
            .map(|n| fs::read(out.join(n)).unwrap())
            .collect();
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn seed_flag_reaches_the_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    bqm(&["check", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "1"]);
    bqm(&["check", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "2"]);
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["config"]["seed"], 1);
    assert_ne!(ra["checks"], rb["checks"]);
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#", "operator": {"lambda": -1}"#);
    let o = bqm(&["all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("operator.lambda"));
    assert!(!out.exists());

    let cfg = write_config(tmp.path(), r#", "operator": {"alpha2": 1}"#);
    assert_eq!(bqm(&["check", "--config", &cfg, "--strict", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    let lenient = bqm(&["check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("operator.alpha2"));
}

#[test]
fn failed_gate_with_uniqueness_assertion_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#", "operator": {"alpha": 3}, "assertions": {"uniqueness": true}"#);
    let o = bqm(&["all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["uniqueness"]["reason"], "condition i' failed");
    assert_eq!(r["solves"]["primal"]["converged"], true);
}

#[test]
fn solver_only_run_has_no_check_section() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#", "checks": []"#);
    assert_eq!(bqm(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let r = report(&out);
    assert!(r.get("checks").is_none());
    assert!(r.get("classification").is_none());
    let stages: Vec<&str> = r["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["discretize", "barriers", "primal", "dual", "oracle"]);
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), r#", "checks": []"#);
    let o = bqm(&["barriers", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
