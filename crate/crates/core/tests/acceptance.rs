//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The suite runs twice, on the default pool and on a single worker, and
//! the two output directories must match byte for byte.

use std::process::ExitCode;
use std::time::Instant;

use donsker::harness::{determinism_check, run_acceptance, threads_from_env, with_threads};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let auto = tempfile::tempdir().expect("temp dir");
    let single = tempfile::tempdir().expect("temp dir");
    let threads = threads_from_env().expect("DONSKER_THREADS");
    let mut report = match with_threads(threads, || run_acceptance(Some(auto.path()))).expect("thread pool") {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let rerun = with_threads(1, || run_acceptance(Some(single.path()))).expect("thread pool");
    let check = match rerun {
        Ok(_) => determinism_check(auto.path(), single.path()).expect("output directories readable"),
        Err(e) => {
            println!("FAIL single-worker rerun aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let c9 = report.criterion_mut(9).expect("criterion 9 present");
    c9.checks.push(check);
    c9.info.push("outputs compared between the default pool and a single worker".into());
    for line in report.lines() {
        println!("{line}");
    }
    for line in report.info_lines() {
        println!("{line}");
    }
    let failed = report.criteria.iter().filter(|c| !c.passed()).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        report.criteria.len() - failed,
        report.criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
