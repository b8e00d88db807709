//! Command-line behaviour: exit codes, output files and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_donsker");

fn config(n_cells: usize, solvers: &str) -> String {
    format!(
        r#"{{
  "seed": 11,
  "model": {{"kind": "constant", "alpha": 0.3, "beta": 0.7}},
  "initial": {{"kind": "gaussian", "mean": 0.0, "variance": 0.2}},
  "space": {{"x_min": -5.0, "x_max": 5.0, "n_cells": {n_cells}}},
  "time": {{"horizon": 0.5, "n_steps": 100}},
  "particles": 4000,
  "solvers": {solvers}
}}"#
    )
}

fn run(dir: &Path, cfg: &str, args: &[&str], threads: Option<&str>) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg("--config").arg(&path).arg("--quiet").args(args);
    if let Some(t) = threads {
        cmd.env("DONSKER_THREADS", t);
    }
    cmd.output().unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn zero_cells_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), &config(0, r#"{"closedform": true}"#), &["--out", out.to_str().unwrap(), "run"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("space.n_cells"), "stderr: {err}");
    assert!(!out.join("report.csv").exists());
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "{ not json", &["run"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &config(200, r#"{"closedform": true}"#), &["run"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn closed_form_run_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), &config(200, r#"{"closedform": true}"#), &["--out", out.to_str().unwrap(), "closed-form"], None);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("metric,slice_t,value"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 11);
}

#[test]
fn fp_and_particles_agree_with_the_shift_and_are_thread_independent() {
    let solvers = r#"{"fp": true, "particle": true, "closedform": true}"#;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = run(dir.path(), &config(400, solvers), &["--out", a.to_str().unwrap(), "run"], Some("4"));
    let ob = run(dir.path(), &config(400, solvers), &["--out", b.to_str().unwrap(), "run"], Some("1"));
    assert_eq!(oa.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn compare_reports_zero_for_identical_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), &config(200, r#"{"fp": true}"#), &["--out", out.to_str().unwrap(), "fokker-planck"], None);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let field = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().ends_with("fp_field.csv"))
        .expect("field file written");
    let c = Command::new(BIN).arg("compare").arg(&field).arg(&field).output().unwrap();
    assert_eq!(c.status.code(), Some(0));
    let text = String::from_utf8_lossy(&c.stdout);
    let l1 = text.lines().find(|l| l.contains(".l1,max,")).expect("max l1 row");
    assert_eq!(l1.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn seed_flag_changes_the_particle_output() {
    let solvers = r#"{"particle": true}"#;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(dir.path(), &config(200, solvers), &["--out", a.to_str().unwrap(), "simulate"], None);
    run(dir.path(), &config(200, solvers), &["--seed", "12", "--out", b.to_str().unwrap(), "simulate"], None);
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert_ne!(fa, fb);
}
