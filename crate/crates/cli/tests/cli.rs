use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qpc_core::harness::suite::SuiteReport;
use qpc_core::harness::{metrics_from_csv, TrialStats};
use qpc_core::protocol::ProtocolTranscript;
use serde_json::Value;

fn qpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpc")).args(args).output().expect("qpc runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn error_of(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error on stderr");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

fn out_path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn run_writes_json_that_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(&dir, "stats.json");
    let o = qpc(&["run", "--config", &config("honest.json"), "--trials", "50", "--jobs", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats = TrialStats::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(stats.scenario.trials, 50);
    assert_eq!(stats.metric("result_exactness").unwrap().estimate, 1.0);
}

#[test]
fn run_writes_csv_from_config_format() {
    let o = qpc(&["run", "--config", &config("eve_intercept.json"), "--trials", "200"]);
    assert!(o.status.success());
    let metrics = metrics_from_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let decoy = metrics.iter().find(|m| m.name == "detection_decoy").unwrap();
    assert_eq!(decoy.trials, 200);
    assert!(decoy.estimate > 0.8);
}

#[test]
fn output_is_independent_of_jobs() {
    let run = |jobs: &str| qpc(&["run", "--config", &config("eve_intercept.json"), "--trials", "3000", "--jobs", jobs]).stdout;
    assert_eq!(run("1"), run("3"));
}

#[test]
fn seed_is_reported_when_absent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"schema_version":1,"protocol":"proposed","n":2,"m":4,"trials":3}"#);
    let o = qpc(&["run", "--config", &cfg]);
    assert!(o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    let seed: u64 = stderr.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let again = qpc(&["run", "--config", &cfg, "--seed", &seed.to_string()]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn negative_m_is_a_config_error_naming_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"schema_version":1,"protocol":"proposed","n":3,"m":-1}"#);
    let o = qpc(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_of(&o);
    assert_eq!(e["category"], "config");
    assert_eq!(e["field"], "m");
}

#[test]
fn unknown_key_and_bad_scenario_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", r#"{"schema_version":1,"protocol":"proposed","n":3,"m":4,"trails":5}"#);
    let e = error_of(&qpc(&["run", "--config", &cfg]));
    assert_eq!(e["field"], "trails");
    let cfg = write(dir.path(), "n1.json", r#"{"schema_version":1,"protocol":"proposed","n":1,"m":4}"#);
    let o = qpc(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_of(&o)["field"], "n");
}

#[test]
fn missing_config_file_exits_1() {
    let o = qpc(&["run", "--config", "/nonexistent/qpc.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_of(&o)["kind"], "io");
}

#[test]
fn unknown_suite_lists_available() {
    let o = qpc(&["suite", "nope", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_of(&o)["message"].as_str().unwrap().contains("paper_tables"));
}

#[test]
fn transcript_requires_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(&dir, "t.json");
    let o = qpc(&["transcript", "--config", &config("honest.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_of(&o)["category"], "usage");
}

#[test]
fn transcript_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(&dir, "t.json");
    let o = qpc(&["transcript", "--config", &config("single_run.json"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let t = ProtocolTranscript::from_json(&text).unwrap();
    assert!(t.is_completed());
    assert_eq!(t.to_json().unwrap() + "\n", text);
}

#[test]
fn suite_reports_rows_and_is_reproducible_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let a = out_path(&dir, "a.json");
    let b = out_path(&dir, "b.csv");
    let o = qpc(&["suite", "paper_tables", "--seed", "4", "--jobs", "1", "--out", a.to_str().unwrap()]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    for k in 1..=9 {
        assert!(stdout.contains(&format!("criterion {k}: ")), "{stdout}");
    }
    let report = SuiteReport::from_json(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(o.status.code(), Some(if report.passed() { 0 } else { 3 }));
    let o = qpc(&["suite", "paper_tables", "--seed", "4", "--jobs", "2", "--out", b.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), stdout);
    assert_eq!(SuiteReport::from_csv("paper_tables", 4, &std::fs::read_to_string(&b).unwrap()).unwrap().rows, report.rows);
}
