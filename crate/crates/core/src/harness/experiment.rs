//! Configured runs over seeded common paths.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ModelSpec};
use super::io;
use super::metrics::{compare_slices, ComparisonReport, SliceMetrics};
use super::svg::{write_overlay, Series};
use crate::closedform::{burgers_slice, gbm_slice, shift_slice, BurgersParams, ColeHopf, PathFunctionals};
use crate::error::{Error, Result};
use crate::fpsolver::{solve_fp_with, DensityField, FpConfig};
use crate::localtime::{default_epsilon, density_local_time, mean_occupation_local_time, occupation_local_time};
use crate::model::{sample_brownian_path, BrownianPath, DensitySlice, InitialLaw, SpaceGrid};
use crate::particle::{conditional_expectation, empirical_density, silverman_bandwidth, simulate_particles_with, EnsembleTrajectory, ParticleConfig};
use crate::rng::derive_seed;
use crate::volterra::{solve_volterra, VolterraKernel};

/// Solvers a subcommand may restrict a run to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Fp,
    Particle,
    ClosedForm,
    Volterra,
    LocalTime,
}

/// One tolerance assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub checks: Vec<CheckResult>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// 0 when every check passes, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(!self.passed())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    path_seeds: Vec<u64>,
    checks: &'a [CheckResult],
    warnings: &'a [String],
}

pub const VERSION: &str = concat!("donsker ", env!("CARGO_PKG_VERSION"));

/// Runs the enabled solvers (or only `only`, plus the oracle when it is
/// enabled) on `config.paths` seeded paths, writing into `out`.
pub fn run_experiment(config: &ExperimentConfig, only: Option<Solver>, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::InvalidInput(format!("{}: {e}", out.display())))?;
    let mut toggles = config.solvers;
    if let Some(s) = only {
        let oracle = toggles.closedform;
        toggles = Default::default();
        toggles.closedform = oracle || s == Solver::ClosedForm;
        match s {
            Solver::Fp => toggles.fp = true,
            Solver::Particle => toggles.particle = true,
            Solver::ClosedForm => {}
            Solver::Volterra => toggles.volterra = true,
            Solver::LocalTime => toggles.localtime = true,
        }
    }
    let law = config.initial_law()?;
    let model = config.model.build()?;
    let grid = config.space_grid()?;
    let tg = config.time_grid()?;
    let tol = config.tolerances;
    let stride = config.output_stride.unwrap_or((tg.n_steps() / 10).max(1));
    let mut outcome = RunOutcome { checks: Vec::new(), files: Vec::new(), warnings: Vec::new() };
    let mut report_rows: Vec<(String, String, f64)> = Vec::new();
    let path_seeds: Vec<u64> = (0..config.paths as u64).map(|p| derive_seed(config.seed, p)).collect();
    let lt_x = config.local_time.x.unwrap_or_else(|| law.mean());

    for (p, &seed) in path_seeds.iter().enumerate() {
        let tag = format!("path{p:03}");
        let file = |name: &str| out.join(format!("{tag}_{name}"));
        let path = sample_brownian_path(tg, seed);
        let n = tg.n_steps();
        let oracle_final = if toggles.closedform { oracle_slice(config, &law, &path, grid, n)? } else { None };

        if let Some(o) = &oracle_final {
            let mass = o.mass();
            report_rows.push((format!("{tag}.closedform.mass"), tg.horizon().to_string(), mass));
            outcome.checks.push(CheckResult::at_most(format!("{tag}.closedform.mass"), (mass - 1.0).abs(), tol.mass));
            let f = file("closedform_final.csv");
            io::write_slice(&f, tg.horizon(), o)?;
            outcome.files.push(f);
        } else if toggles.closedform {
            outcome.warnings.push(format!("{tag}: no closed form for this model and initial law"));
        }

        let mut fp_field: Option<DensityField> = None;
        if toggles.fp || (toggles.localtime && grid.contains(lt_x)) {
            let init = law.tabulate(grid)?;
            let mut cfg = FpConfig::default();
            if toggles.localtime && grid.contains(lt_x) {
                cfg.probes.push(lt_x);
            }
            let field = solve_fp_with(&model, &init, &path, grid, &cfg)?;
            outcome.warnings.extend(field.warnings.iter().map(|w| format!("{tag}.fp: {w}")));
            outcome.checks.push(CheckResult::at_most(format!("{tag}.fp.mass_drift"), field.mass_drift(), tol.mass));
            let f = file("fp_field.csv");
            io::write_field(&f, &field, stride)?;
            let l = file("fp_mass_ledger.csv");
            io::write_ledger(&l, &field.ledger)?;
            outcome.files.extend([f, l]);
            if let Some(o) = &oracle_final {
                let m = compare_slices(tg.horizon(), &field.final_slice(), o)?;
                record_comparison(&mut outcome, &mut report_rows, &format!("{tag}.fp_vs_closedform"), m, tol.l1, Some(tol.sup));
                if config.plots {
                    plot(&file("fp_vs_closedform.svg"), &field.final_slice(), o, "fp", &mut outcome)?;
                }
            }
            fp_field = Some(field);
        }

        let mut ensemble: Option<EnsembleTrajectory> = None;
        if toggles.particle || toggles.localtime {
            let pcfg = ParticleConfig { bandwidth: config.bandwidth, ..Default::default() };
            let traj = simulate_particles_with(&model, &law, &path, config.particles, seed, &pcfg)?;
            if toggles.particle {
                let fin = traj.final_snapshot();
                let h = config.bandwidth.unwrap_or_else(|| silverman_bandwidth(&fin.positions));
                let est = empirical_density(&fin.positions, &grid, h)?;
                outcome.warnings.extend(est.warning.iter().map(|w| format!("{tag}.particle: {w}")));
                let mean = conditional_expectation(&fin, |x| x)?;
                report_rows.push((format!("{tag}.particle.mean"), tg.horizon().to_string(), mean));
                report_rows.push((format!("{tag}.particle.bandwidth"), tg.horizon().to_string(), h));
                let f = file("particle_kde_final.csv");
                io::write_slice(&f, tg.horizon(), &est.slice)?;
                outcome.files.push(f);
                if let Some(o) = &oracle_final {
                    let m = compare_slices(tg.horizon(), &est.slice, o)?;
                    record_comparison(&mut outcome, &mut report_rows, &format!("{tag}.particle_vs_closedform"), m, tol.particle_l1, None);
                    if config.plots {
                        plot(&file("particle_vs_closedform.svg"), &est.slice, o, "particle", &mut outcome)?;
                    }
                }
            }
            ensemble = Some(traj);
        }

        if toggles.volterra {
            let kern = VolterraKernel::new(config.model.alpha(), config.model.beta(), config.volterra.drift_sign)?;
            let sol = solve_volterra(&kern, &law, &path, &grid, config.volterra.max_iter, config.volterra.tol)?;
            let f = file("volterra_field.csv");
            io::write_field(&f, &sol.field, stride)?;
            let h = file("volterra_history.csv");
            io::write_history(&h, &sol.history)?;
            outcome.files.extend([f, h]);
            report_rows.push((format!("{tag}.volterra.iterations"), tg.horizon().to_string(), sol.iterations() as f64));
            if let Some(o) = &oracle_final {
                let m = compare_slices(tg.horizon(), &sol.field.final_slice(), o)?;
                record_comparison(&mut outcome, &mut report_rows, &format!("{tag}.volterra_vs_closedform"), m, tol.l1, None);
            }
        }

        if toggles.localtime {
            let eps = config.local_time.epsilon.unwrap_or_else(|| default_epsilon(tg.dt(), grid.dx()));
            let traj = ensemble.as_ref().expect("ensemble computed for local time");
            // conditional on the path, E[L_t(x)] is the time integral of the density
            let occ = mean_occupation_local_time(&tg, traj.n_particles(), |i| traj.particle_path(i), lt_x, eps)?;
            let single = occupation_local_time(&tg, &traj.particle_path(0), lt_x, eps)?;
            outcome.warnings.extend(single.warnings.iter().map(|w| format!("{tag}.localtime: {w}")));
            report_rows.push((format!("{tag}.localtime.occupation_particle0"), tg.horizon().to_string(), single.terminal()));
            report_rows.push((format!("{tag}.localtime.occupation_mean"), tg.horizon().to_string(), occ.terminal()));
            let dens = match &fp_field {
                Some(f) if grid.contains(lt_x) => Some(density_local_time(f, lt_x)?),
                _ => None,
            };
            let f = file("local_time.csv");
            match &dens {
                Some(d) => {
                    io::write_curves(&f, &[&occ, d])?;
                    report_rows.push((format!("{tag}.localtime.density_integral"), tg.horizon().to_string(), d.terminal()));
                    let rel = (occ.terminal() - d.terminal()).abs() / d.terminal().abs().max(f64::MIN_POSITIVE);
                    outcome.checks.push(CheckResult::at_most(format!("{tag}.localtime.relative_gap"), rel, tol.local_time_rel));
                }
                None => io::write_curves(&f, &[&occ])?,
            }
            outcome.files.push(f);
        }
    }

    for c in &outcome.checks {
        report_rows.push((format!("check.{}", c.name), "bound".into(), c.bound));
    }
    let r = out.join("report.csv");
    io::write_report(&r, &report_rows)?;
    outcome.files.push(r);
    let summary = Summary {
        version: VERSION,
        config,
        path_seeds,
        checks: &outcome.checks,
        warnings: &outcome.warnings,
    };
    let s = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(&s, text + "\n").map_err(|e| Error::InvalidInput(format!("{}: {e}", s.display())))?;
    outcome.files.push(s);
    Ok(outcome)
}

fn record_comparison(
    outcome: &mut RunOutcome,
    rows: &mut Vec<(String, String, f64)>,
    label: &str,
    m: SliceMetrics,
    l1_bound: f64,
    sup_bound: Option<f64>,
) {
    let rep = ComparisonReport { label: label.into(), slices: vec![m], metadata: Default::default() };
    rows.extend(rep.rows().into_iter().filter(|r| r.1 != "max"));
    outcome.checks.push(CheckResult::at_most(format!("{label}.l1"), m.l1, l1_bound));
    if let Some(b) = sup_bound {
        outcome.checks.push(CheckResult::at_most(format!("{label}.sup"), m.sup, b));
    }
}

fn plot(path: &Path, a: &DensitySlice, b: &DensitySlice, name: &str, outcome: &mut RunOutcome) -> Result<()> {
    let x = a.grid.nodes();
    write_overlay(
        path,
        &format!("{name} vs closed form at T"),
        &[Series { label: name, x: &x, y: &a.values }, Series { label: "closed form", x: &x, y: &b.values }],
    )?;
    outcome.files.push(path.to_path_buf());
    Ok(())
}

/// Closed-form conditional density at knot `j`, when one exists.
pub fn oracle_slice(
    config: &ExperimentConfig,
    law: &InitialLaw,
    path: &BrownianPath,
    grid: SpaceGrid,
    j: usize,
) -> Result<Option<DensitySlice>> {
    let tg = path.time_grid();
    let t = tg.t(j);
    let slice = match config.model {
        ModelSpec::Constant { alpha, beta } | ModelSpec::XFree { alpha, beta } => {
            if law.is_dirac() {
                return Ok(None);
            }
            let h = law.density_fn()?;
            Some(shift_slice(h, PathFunctionals::constant(alpha, beta, path).shift(j), grid))
        }
        ModelSpec::Gbm { alpha, beta } => match law {
            InitialLaw::LogNormal { .. } => {
                let big_h = |u: f64| law.log_density(u).unwrap_or(0.0);
                Some(gbm_slice(big_h, (alpha - 0.5 * beta * beta) * t, beta * path.value(j), grid))
            }
            _ => None,
        },
        ModelSpec::Burgers { alpha, beta } => {
            if law.is_dirac() {
                return Ok(None);
            }
            let h = law.density_fn()?;
            Some(burgers_slice(h, BurgersParams::new(alpha, beta)?, t, path.value(j), grid, &ColeHopf::default())?)
        }
    };
    Ok(slice)
}
