use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use donsker::harness::io::{read_field, write_report};
use donsker::harness::{
    compare_fields, determinism_check, exit, run_acceptance, run_experiment, threads_from_env, with_threads, ExperimentConfig, Solver,
};
use donsker::Error;

#[derive(Parser)]
#[command(name = "donsker", version, about = "Conditional densities of McKean-Vlasov processes with common noise")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver enabled in the configuration.
    Run,
    /// Interacting particle system on common paths.
    Simulate,
    /// Grid solver for the stochastic Fokker-Planck equation.
    FokkerPlanck,
    /// Closed-form conditional densities and their normalization.
    ClosedForm,
    /// Picard solver for the stochastic Volterra equation.
    Volterra,
    /// Occupation and density-integral local times.
    LocalTime,
    /// Full acceptance suite.
    Validate {
        /// Rerun on a single worker and require byte-identical output.
        #[arg(long)]
        determinism: bool,
    },
    /// Compare two `t,x,m` field files on identical lattices.
    Compare { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return fail(exit::CONFIG, &e),
    };
    match with_threads(threads, || dispatch(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(exit::SOLVER, &e),
    }
}

fn fail(code: u8, e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn dispatch(cli: &Cli) -> u8 {
    let solver = match &cli.command {
        Command::Validate { determinism } => return validate(cli, *determinism),
        Command::Compare { a, b } => return compare(cli, a, b),
        Command::Run => None,
        Command::Simulate => Some(Solver::Particle),
        Command::FokkerPlanck => Some(Solver::Fp),
        Command::ClosedForm => Some(Solver::ClosedForm),
        Command::Volterra => Some(Solver::Volterra),
        Command::LocalTime => Some(Solver::LocalTime),
    };
    let Some(path) = &cli.config else {
        eprintln!("error: --config is required for this command");
        return exit::CONFIG;
    };
    let mut config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output_dir = o.clone();
    }
    let outcome = match run_experiment(&config, solver, &config.output_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: solver failure: {e}");
            return exit::SOLVER;
        }
    };
    if !cli.quiet {
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        for c in &outcome.checks {
            println!("{} {} {:.6e} <= {:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
        }
        println!("wrote {} files to {}", outcome.files.len(), config.output_dir.display());
    }
    for c in outcome.failures() {
        eprintln!("tolerance failure: {} = {:e} exceeds {:e}", c.name, c.value, c.bound);
    }
    outcome.exit_code()
}

fn validate(cli: &Cli, determinism: bool) -> u8 {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out/validate"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: {}: {e}", out.display());
        return exit::CONFIG;
    }
    let mut report = match run_acceptance(Some(&out)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: solver failure: {e}");
            return exit::SOLVER;
        }
    };
    if determinism {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "validate".into());
        name.push(".single_worker");
        let single = out.with_file_name(name);
        let rerun = std::fs::create_dir_all(&single)
            .map_err(|e| Error::InvalidInput(e.to_string()))
            .and_then(|_| with_threads(1, || run_acceptance(Some(&single))))
            .and_then(|r| r)
            .and_then(|_| determinism_check(&out, &single));
        match rerun {
            Ok(check) => {
                if let Some(c9) = report.criterion_mut(9) {
                    c9.checks.push(check);
                }
            }
            Err(e) => {
                eprintln!("error: solver failure: {e}");
                return exit::SOLVER;
            }
        }
    }
    if !cli.quiet {
        for l in report.lines().into_iter().chain(report.info_lines()) {
            println!("{l}");
        }
    }
    if report.passed() {
        exit::OK
    } else {
        exit::TOLERANCE
    }
}

fn compare(cli: &Cli, a: &Path, b: &Path) -> u8 {
    let fields = read_field(a).and_then(|fa| read_field(b).map(|fb| (fa, fb)));
    let (fa, fb) = match fields {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let report = match compare_fields(&fa, &fb) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let rows = report.rows();
    if let Some(dir) = &cli.out {
        if let Err(e) = std::fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(e.to_string())).and_then(|_| write_report(&dir.join("compare.csv"), &rows)) {
            eprintln!("error: {e}");
            return exit::SOLVER;
        }
    }
    if !cli.quiet {
        println!("metric,slice_t,value");
        for (m, t, v) in rows {
            println!("{m},{t},{v}");
        }
    }
    exit::OK
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
  "seed": 5,
  "model": {"kind": "constant", "alpha": 0.3, "beta": 0.7},
  "initial": {"kind": "gaussian", "mean": 0.0, "variance": 0.2},
  "space": {"x_min": -5.0, "x_max": 5.0, "n_cells": N_CELLS},
  "time": {"horizon": 0.5, "n_steps": 100},
  "solvers": {"fp": true, "closedform": true}
}"#;

    fn code(dir: &Path, n_cells: usize, args: &[&str]) -> u8 {
        let cfg = dir.join("config.json");
        std::fs::write(&cfg, CONFIG.replace("N_CELLS", &n_cells.to_string())).unwrap();
        let out = dir.join("out");
        let mut argv = vec!["donsker", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        argv.extend_from_slice(args);
        dispatch(&Cli::try_parse_from(argv).unwrap())
    }

    #[test]
    fn zero_cells_exits_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(code(dir.path(), 0, &["run"]), exit::CONFIG);
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn missing_config_exits_with_config_code() {
        let cli = Cli::try_parse_from(["donsker", "--quiet", "--config", "/nonexistent/c.json", "run"]).unwrap();
        assert_eq!(dispatch(&cli), exit::CONFIG);
        let cli = Cli::try_parse_from(["donsker", "--quiet", "fokker-planck"]).unwrap();
        assert_eq!(dispatch(&cli), exit::CONFIG);
    }

    #[test]
    fn passing_run_exits_zero_and_compares_clean() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(code(dir.path(), 200, &["run"]), exit::OK);
        let field = dir.path().join("out/path000_fp_field.csv");
        assert!(field.exists());
        let cli = Cli::try_parse_from(["donsker", "--quiet", "compare", field.to_str().unwrap(), field.to_str().unwrap()]).unwrap();
        assert_eq!(dispatch(&cli), exit::OK);
    }

    #[test]
    fn compare_rejects_missing_files() {
        let cli = Cli::try_parse_from(["donsker", "--quiet", "compare", "/nonexistent/a.csv", "/nonexistent/b.csv"]).unwrap();
        assert_eq!(dispatch(&cli), exit::CONFIG);
    }
}
