//! Configuration, metrics, output files and the validation suite.

pub mod acceptance;
pub mod config;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod svg;

pub use acceptance::{determinism_check, run_acceptance, AcceptanceReport, Check, CriterionOutcome};
pub use config::ExperimentConfig;
pub use experiment::{run_experiment, CheckResult, RunOutcome, Solver};
pub use metrics::{compare_fields, compare_slices, ComparisonReport, SliceMetrics};

use crate::error::{Error, Result};

/// Environment variable capping the worker count (0 = automatic).
pub const THREADS_ENV: &str = "DONSKER_THREADS";

/// Worker count from `DONSKER_THREADS`; 0 when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Runs `f` on a pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Exit status of a command.
pub mod exit {
    pub const OK: u8 = 0;
    pub const TOLERANCE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const SOLVER: u8 = 3;
}
