//! Desk-scale validation suite: each criterion runs its solvers against
//! an independent oracle and records named checks with bounds.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;

use super::io;
use super::metrics::{compare_slices, restricted_l1};
use crate::closedform::{
    brownian_delta_conditional, burgers_slice, gbm_slice, reconstruct_state, shift_slice, BurgersParams, ColeHopf,
    PathFunctionals,
};
use crate::error::Result;
use crate::fpsolver::{solve_fp_with, DensityField, FpConfig, NoiseCalculus};
use crate::localtime::{density_local_time, expected_local_time_bm, occupation_local_time};
use crate::model::{sample_brownian_path, BrownianPath, CoefficientModel, InitialLaw, SpaceGrid, TimeGrid};
use crate::particle::{
    conditional_expectation, empirical_density, silverman_bandwidth, simulate_particles, simulate_particles_with,
    BurgersClosure, ParticleConfig,
};
use crate::quadrature::{adaptive_simpson, composite_gl10, normal_pdf};
use crate::rng::derive_seed;
use crate::volterra::{
    sign_study, solve_volterra, solve_volterra_with, PicardOrdering, VolterraConfig, VolterraKernel, VolterraNoise,
};

/// Master seed of the suite.
pub const ACCEPTANCE_SEED: u64 = 0x00d0_5e7e_2024;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: "<=", pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: ">=", pass: value >= bound }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), bound: 1.0, relation: ">=", pass: ok }
    }

    pub fn describe(&self) -> String {
        format!("{} {:.4e} {} {:.4e}", self.name, self.value, self.relation, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Lines reported alongside the checks without affecting the verdict.
    pub info: Vec<String>,
}

impl CriterionOutcome {
    fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), info: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let detail: Vec<String> = self.checks.iter().map(Check::describe).collect();
        format!("{verdict} criterion {}: {} | {}", self.id, self.title, detail.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceReport {
    pub criteria: Vec<CriterionOutcome>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionOutcome::passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.criteria.iter().map(CriterionOutcome::line).collect()
    }

    pub fn info_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .flat_map(|c| c.info.iter().map(move |i| format!("info criterion {}: {i}", c.id)))
            .collect()
    }

    pub fn criterion_mut(&mut self, id: u8) -> Option<&mut CriterionOutcome> {
        self.criteria.iter_mut().find(|c| c.id == id)
    }

    /// `criterion,check,value,relation,bound,status` plus a text copy of the lines.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for c in &self.criteria {
            for k in &c.checks {
                rows.push((format!("c{}.{}", c.id, k.name), if k.pass { "pass" } else { "fail" }.to_string(), k.value));
                rows.push((format!("c{}.{}.bound", c.id, k.name), k.relation.to_string(), k.bound));
            }
        }
        io::write_report(&dir.join("acceptance.csv"), &rows)?;
        let mut text = self.lines().join("\n");
        text.push('\n');
        for l in self.info_lines() {
            text.push_str(&l);
            text.push('\n');
        }
        std::fs::write(dir.join("acceptance.txt"), text).map_err(|e| crate::Error::InvalidInput(e.to_string()))
    }
}

/// Mass drifts of every Fokker-Planck run in the suite.
#[derive(Default)]
struct MassTracker(Mutex<Vec<(String, f64)>>);

impl MassTracker {
    fn solve(
        &self,
        label: String,
        model: &CoefficientModel,
        law: &InitialLaw,
        path: &BrownianPath,
        grid: SpaceGrid,
        cfg: &FpConfig,
    ) -> Result<DensityField> {
        let init = law.tabulate(grid)?;
        let f = solve_fp_with(model, &init, path, grid, cfg)?;
        self.0.lock().expect("tracker lock").push((label, f.mass_drift()));
        Ok(f)
    }

    fn worst(&self) -> (usize, f64, String) {
        let v = self.0.lock().expect("tracker lock");
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let (name, worst) = sorted.iter().fold((String::new(), 0.0f64), |acc, (n, d)| if *d > acc.1 { (n.clone(), *d) } else { acc });
        (v.len(), worst, name)
    }
}

fn seed(criterion: u64, k: u64) -> u64 {
    derive_seed(ACCEPTANCE_SEED, criterion * 1_000_000 + k)
}

fn gauss(mean: f64, var: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |x| normal_pdf(x, mean, var)
}

/// Runs criteria 1 to 9; the determinism half of criterion 9 is added by
/// the caller, which can rerun the suite under another thread count.
pub fn run_acceptance(out: Option<&Path>) -> Result<AcceptanceReport> {
    let tracker = MassTracker::default();
    let (c1, c2) = shift_criteria(&tracker, out)?;
    let mut criteria = vec![c1, c2, particle_criterion()?, gbm_criterion(&tracker)?, burgers_criterion(&tracker)?];
    criteria.push(volterra_criterion(out)?);
    criteria.push(local_time_criterion(&tracker, out)?);
    criteria.push(conditional_formula_criterion()?);
    let mut c9 = CriterionOutcome::new(9, "conservation and determinism");
    let (n, worst, name) = tracker.worst();
    c9.checks.push(Check::at_most("fp.max_mass_drift", worst, 1e-6));
    c9.info.push(format!("{n} Fokker-Planck runs, largest drift in {name}"));
    criteria.push(c9);
    let report = AcceptanceReport { criteria };
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

/// Byte comparison of every file in two output directories.
pub fn determinism_check(a: &Path, b: &Path) -> Result<Check> {
    let list = |d: &Path| -> Result<Vec<std::path::PathBuf>> {
        let mut v: Vec<_> = std::fs::read_dir(d)
            .map_err(|e| crate::Error::InvalidInput(format!("{}: {e}", d.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        v.sort();
        Ok(v)
    };
    let la = list(a)?;
    let lb = list(b)?;
    let names = |v: &[std::path::PathBuf]| v.iter().map(|p| p.file_name().map(|s| s.to_owned())).collect::<Vec<_>>();
    let mut same = !la.is_empty() && names(&la) == names(&lb);
    if same {
        for (x, y) in la.iter().zip(&lb) {
            let bx = std::fs::read(x).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
            let by = std::fs::read(y).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
            same &= bx == by;
        }
    }
    Ok(Check::flag(format!("validate.byte_identical({} files)", la.len()), same))
}

fn shift_criteria(tracker: &MassTracker, out: Option<&Path>) -> Result<(CriterionOutcome, CriterionOutcome)> {
    let model = CoefficientModel::x_free(0.2, 1.0);
    let law = InitialLaw::gaussian(0.0, 0.25)?;
    let h = gauss(0.0, 0.25);
    let coarse_grid = SpaceGrid::with_spacing(-8.0, 8.0, 0.02)?;
    let fine_grid = coarse_grid.refined();
    let fine_tg = TimeGrid::new(1.0, 2000)?;

    struct PathResult {
        sup: f64,
        l1: f64,
        sup_fine: f64,
        var_t: f64,
        rows: Vec<(String, String, f64)>,
    }
    let errors = |field: &DensityField, path: &BrownianPath| -> (f64, f64) {
        let pf = PathFunctionals::constant(0.2, 1.0, path);
        let mut sup = 0.0f64;
        let mut l1 = 0.0f64;
        for j in 0..field.n_rows() {
            let o = shift_slice(h, pf.shift(j), *field.space_grid());
            let m = compare_slices(0.0, &field.slice(j), &o).expect("same grid");
            sup = sup.max(m.sup);
            l1 = l1.max(m.l1);
        }
        (sup, l1)
    };
    let results: Vec<PathResult> = (0..10u64)
        .into_par_iter()
        .map(|k| -> Result<PathResult> {
            let fine = sample_brownian_path(fine_tg, seed(1, k));
            let coarse = fine.coarsen()?;
            let fc = tracker.solve(format!("c1.path{k}.coarse"), &model, &law, &coarse, coarse_grid, &FpConfig::default())?;
            let (sup, l1) = errors(&fc, &coarse);
            let ff = tracker.solve(format!("c1.path{k}.fine"), &model, &law, &fine, fine_grid, &FpConfig::default())?;
            let (sup_fine, _) = errors(&ff, &fine);
            let var_t = fc.final_slice().central_second_moment();
            let t = "1".to_string();
            let rows = vec![
                (format!("c1.path{k}.sup"), "max".into(), sup),
                (format!("c1.path{k}.l1"), "max".into(), l1),
                (format!("c1.path{k}.sup_refined"), "max".into(), sup_fine),
                (format!("c2.path{k}.variance"), t, var_t),
            ];
            Ok(PathResult { sup, l1, sup_fine, var_t, rows })
        })
        .collect::<Result<_>>()?;

    let mut c1 = CriterionOutcome::new(1, "shift-oracle equivalence");
    let sup = results.iter().fold(0.0f64, |a, r| a.max(r.sup));
    let l1 = results.iter().fold(0.0f64, |a, r| a.max(r.l1));
    let ratio = results.iter().fold(f64::INFINITY, |a, r| a.min(r.sup / r.sup_fine));
    c1.checks.push(Check::at_most("fp_vs_shift.sup(max over paths, t)", sup, 2e-2));
    c1.checks.push(Check::at_most("fp_vs_shift.l1(max over paths, t)", l1, 1e-2));
    c1.checks.push(Check::at_least("sup_reduction_on_halving(min over paths)", ratio, 2.0));
    let mut c2 = CriterionOutcome::new(2, "conditional-variance rigidity");
    let dev = results.iter().fold(0.0f64, |a, r| a.max((r.var_t - 0.25).abs()));
    c2.checks.push(Check::at_most("|var(T) - 0.25|(max over paths)", dev, 2e-3));
    if let Some(dir) = out {
        let rows: Vec<_> = results.iter().flat_map(|r| r.rows.clone()).collect();
        io::write_report(&dir.join("c1_shift.csv"), &rows)?;
    }
    Ok((c1, c2))
}

fn particle_criterion() -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(3, "particle oracle");
    let tg = TimeGrid::new(1.0, 1000)?;
    let path = sample_brownian_path(tg, seed(3, 0));
    let law = InitialLaw::gaussian(0.0, 0.25)?;
    let traj = simulate_particles(&CoefficientModel::x_free(0.2, 1.0), &law, &path, 100_000, seed(3, 1))?;
    let fin = traj.final_snapshot();
    let grid = SpaceGrid::with_spacing(-8.0, 8.0, 0.02)?;
    let est = empirical_density(&fin.positions, &grid, silverman_bandwidth(&fin.positions))?;
    let pf = PathFunctionals::constant(0.2, 1.0, &path);
    let oracle = shift_slice(gauss(0.0, 0.25), pf.shift(tg.n_steps()), grid);
    c.checks.push(Check::at_most("kde_vs_shift.l1", compare_slices(1.0, &est.slice, &oracle)?.l1, 5e-2));

    let z = traj.snapshot(0).positions;
    let mut worst = 0.0f64;
    for j in 1..traj.n_snapshots() {
        let x = traj.snapshot(j).positions;
        for i in 1..x.len() {
            let scale = f64::EPSILON * (x[i].abs() + x[0].abs() + z[i].abs() + z[0].abs());
            let dev = ((x[i] - x[0]) - (z[i] - z[0])).abs();
            worst = worst.max(if scale > 0.0 { dev / scale } else { dev });
        }
    }
    c.checks.push(Check::at_most("pairwise_rigidity(roundoff units)", worst, 4.0));
    let state = reconstruct_state(&est.slice).value;
    let mean = conditional_expectation(&fin, |x| x)?;
    c.checks.push(Check::at_most("|reconstruct_state - ensemble mean|", (state - mean).abs(), 2e-2));
    Ok(c)
}

fn gbm_criterion(tracker: &MassTracker) -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(4, "geometric Brownian motion");
    let (alpha, beta) = (0.05, 0.2);
    let tg = TimeGrid::new(1.0, 1000)?;
    let path = sample_brownian_path(tg, seed(4, 0));
    let law = InitialLaw::log_normal(0.0, 0.3)?;
    let model = CoefficientModel::gbm(alpha, beta);
    let grid = SpaceGrid::with_spacing(0.01, 12.0, 0.01)?;
    let big_h = gauss(0.0, 0.09);
    let b_t = path.terminal();
    let oracle = gbm_slice(big_h, (alpha - 0.5 * beta * beta) * 1.0, beta * b_t, grid);
    let literal = gbm_slice(big_h, alpha * 1.0, beta * b_t, grid);

    let traj = simulate_particles(&model, &law, &path, 100_000, seed(4, 1))?;
    let fin = traj.final_snapshot();
    let est = empirical_density(&fin.positions, &grid, silverman_bandwidth(&fin.positions))?;
    c.checks.push(Check::at_most("kde_vs_gbm_delta.l1", compare_slices(1.0, &est.slice, &oracle)?.l1, 5e-2));

    let field = tracker.solve("c4.gbm".into(), &model, &law, &path, grid, &FpConfig::default())?;
    let fin_fp = field.final_slice();
    c.checks.push(Check::at_most("fp_vs_gbm_delta.l1[0.3,3]", restricted_l1(&fin_fp, &oracle, 0.3, 3.0)?, 3e-2));
    c.info.push(format!(
        "oracle with a_t = int alpha (no Ito correction): L1[0.3,3] to fp {:.4e}, to kde {:.4e}",
        restricted_l1(&fin_fp, &literal, 0.3, 3.0)?,
        compare_slices(1.0, &est.slice, &literal)?.l1
    ));
    Ok(c)
}

fn burgers_criterion(tracker: &MassTracker) -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(5, "Burgers via Cole-Hopf");
    let params = BurgersParams::new(1.0, 1.0)?;
    let model = CoefficientModel::burgers(1.0, 1.0)?;
    let law = InitialLaw::gaussian(0.0, 1.0)?;
    let h = gauss(0.0, 1.0);
    let grid = SpaceGrid::with_spacing(-10.0, 10.0, 0.01)?;
    let tg = TimeGrid::new(0.5, 500)?;
    let ch = ColeHopf::default();

    let at0 = burgers_slice(h, params, 0.0, 0.0, grid, &ch)?;
    let defect = (0..grid.n_nodes()).map(|i| (at0.values[i] - h(grid.x(i))).abs()).fold(0.0, f64::max);
    c.checks.push(Check::at_most("sup|burgers_delta(t=0) - h|", defect, 1e-10));

    let mut mass_dev = 0.0f64;
    let mut l1_ito = 0.0f64;
    let mut l1_strat = 0.0f64;
    let mut l1_particle = 0.0f64;
    for k in 0..5u64 {
        let path = sample_brownian_path(tg, seed(5, k));
        let oracle = burgers_slice(h, params, 0.5, path.terminal(), grid, &ch)?;
        mass_dev = mass_dev.max((oracle.mass() - 1.0).abs());
        let ito = tracker.solve(format!("c5.path{k}.ito"), &model, &law, &path, grid, &FpConfig::default())?;
        l1_ito = l1_ito.max(compare_slices(0.5, &ito.final_slice(), &oracle)?.l1);
        let strat_cfg = FpConfig { calculus: NoiseCalculus::Stratonovich, ..Default::default() };
        let strat = tracker.solve(format!("c5.path{k}.stratonovich"), &model, &law, &path, grid, &strat_cfg)?;
        l1_strat = l1_strat.max(compare_slices(0.5, &strat.final_slice(), &oracle)?.l1);
        if k == 0 {
            let pcfg = ParticleConfig { closure: BurgersClosure::Prescribed(std::sync::Arc::new(ito.clone())), ..Default::default() };
            let traj = simulate_particles_with(&model, &law, &path, 100_000, seed(5, 100), &pcfg)?;
            let fin = traj.final_snapshot();
            let est = empirical_density(&fin.positions, &grid, silverman_bandwidth(&fin.positions))?;
            l1_particle = compare_slices(0.5, &est.slice, &ito.final_slice())?.l1;
        }
    }
    c.checks.push(Check::at_most("|burgers_delta mass - 1|(max over paths)", mass_dev, 1e-6));
    c.checks.push(Check::at_most("fp_vs_burgers_delta.l1(max over paths)", l1_ito, 3e-2));
    c.info.push(format!("Stratonovich-mode fp vs burgers_delta: max L1 {l1_strat:.4e}"));
    c.info.push(format!("Ito fp vs fp-fed particle KDE (N = 1e5, path 0): L1 {l1_particle:.4e}"));
    Ok(c)
}

fn volterra_criterion(out: Option<&Path>) -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(6, "stochastic Volterra equation");
    let tg = TimeGrid::new(0.5, 500)?;
    let grid = SpaceGrid::with_spacing(-8.0, 8.0, 0.02)?;
    let path = sample_brownian_path(tg, seed(6, 0));
    let law = InitialLaw::Dirac { x0: 0.0 }.mollify(0.1)?;
    let kern = VolterraKernel::new(0.0, 1.0, 1.0)?;
    let sol = solve_volterra(&kern, &law, &path, &grid, 20, 1e-8)?;
    c.checks.push(Check::at_most("picard_iterations", sol.iterations() as f64, 20.0));
    c.checks.push(Check::at_most("final_residual", *sol.history.last().expect("nonempty"), 1e-8));
    let ratio = sol.max_ratio();
    c.checks.push(Check { name: "residual_ratio".into(), value: ratio, bound: 1.0, relation: "<", pass: ratio < 1.0 });
    let h = gauss(0.0, 0.01);
    let oracle = shift_slice(h, path.terminal(), grid);
    c.checks.push(Check::at_most("volterra_vs_shift.l1", compare_slices(0.5, &sol.field.final_slice(), &oracle)?.l1, 3e-2));

    let literal = solve_volterra_with(&kern, &law, &path, &grid, 20, 1e-8, &VolterraConfig { noise: VolterraNoise::Literal, ..Default::default() })?;
    let flipped = shift_slice(h, -path.terminal(), grid);
    c.info.push(format!(
        "literal +beta noise: L1 to h(x - B) {:.4e}, to h(x + B) {:.4e}",
        compare_slices(0.5, &literal.field.final_slice(), &oracle)?.l1,
        compare_slices(0.5, &literal.field.final_slice(), &flipped)?.l1
    ));
    let jac_cfg = VolterraConfig { ordering: PicardOrdering::Jacobi, ..Default::default() };
    let jacobi_history = match solve_volterra_with(&kern, &law, &path, &grid, 20, 1e-8, &jac_cfg) {
        Ok(s) => s.history,
        Err(crate::Error::NoConvergence { history, .. }) => history,
        Err(e) => return Err(e),
    };
    let jr: Vec<String> = jacobi_history.iter().map(|d| format!("{d:.3e}")).collect();
    c.info.push(format!("Jacobi-ordered Picard residuals: {}", jr.join(" ")));

    let st_tg = TimeGrid::new(0.5, 100)?;
    let st_grid = SpaceGrid::with_spacing(-6.0, 6.0, 0.05)?;
    let study = sign_study(0.5, 1.0, 0.0, st_tg, &st_grid, 200, seed(6, 1), &VolterraConfig::default())?;
    for r in &study {
        c.info.push(format!(
            "drift_sign {:+}: mean first moment {:.4} (se {:.4}); z vs x0-aT {:.2}, z vs x0+aT {:.2}; L1 to N(x0-aT) {:.4e}, to p = N(x0+aT) {:.4e}; matches p: {}",
            r.drift_sign, r.mean_first_moment, r.standard_error, r.z_minus, r.z_plus, r.l1_minus, r.l1_plus, r.matches_plus()
        ));
    }
    let winners: Vec<f64> = study.iter().filter(|r| r.matches_plus() && !r.matches_minus()).map(|r| r.drift_sign).collect();
    c.checks.push(Check::flag("sign_study.identifies_one_sign_matching_p", winners.len() == 1));
    if let Some(s) = winners.first() {
        c.info.push(format!("drift_sign {s:+} reproduces the unconditional density p"));
    }
    if let Some(dir) = out {
        io::write_history(&dir.join("c6_volterra_history.csv"), &sol.history)?;
        io::write_history(&dir.join("c6_volterra_jacobi_history.csv"), &jacobi_history)?;
    }
    Ok(c)
}

fn local_time_criterion(tracker: &MassTracker, out: Option<&Path>) -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(7, "local time");
    let eps = 0.05;
    let target = (2.0 / PI).sqrt();
    let tg = TimeGrid::new(1.0, 10_000)?;
    let n_paths = 10_000u64;
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let p = sample_brownian_path(tg, seed(7, k));
            occupation_local_time(&tg, p.values(), 0.0, eps).map(|c| c.terminal())
        })
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    c.checks.push(Check::at_most("|mean occupation L(1) / sqrt(2/pi) - 1|", (mean / target - 1.0).abs(), 2e-2));
    // E of the band estimator: ∫₀¹ P(|B_s| < ε) / 2ε ds, with s = u²
    let band = |u: f64| if u == 0.0 { 0.0 } else { libm::erf(eps / (u * 2f64.sqrt())) * u / eps };
    let smoothed = adaptive_simpson(&band, 0.0, 1.0, 1e-12);
    c.info.push(format!(
        "mean occupation {mean:.5} (se {se:.5}); sqrt(2/pi) = {target:.5}; band-smoothed expectation {smoothed:.5}, z = {:.2}",
        (mean - smoothed) / se
    ));

    let dtg = TimeGrid::new(1.0, 1000)?;
    let dgrid = SpaceGrid::with_spacing(-6.0, 6.0, 0.01)?;
    let field = DensityField::tabulate_point_source(dtg, dgrid, 0.0, 1.0, |t, x| normal_pdf(x, 0.0, t))?;
    let lt = density_local_time(&field, 0.0)?;
    c.checks.push(Check::at_most("|density_local_time(1) - sqrt(2/pi)|", (lt.terminal() - target).abs(), 1e-3));
    c.info.push(format!("expected_local_time_bm(1, 0, 0) = {:.8}", expected_local_time_bm(1.0, 0.0, 0.0)));

    // single path: band occupation of X = Z + B against ∫ m(s, 0) ds with init N(0, ε²/3)
    let path = sample_brownian_path(tg, seed(7, n_paths + 1));
    let law = InitialLaw::gaussian(0.0, eps * eps / 3.0)?;
    let grid = SpaceGrid::with_spacing(-6.0, 6.0, 0.0025)?;
    let cfg = FpConfig { stride: tg.n_steps(), probes: vec![0.0], ..Default::default() };
    let f = tracker.solve("c7.dual".into(), &CoefficientModel::x_free(0.0, 1.0), &law, &path, grid, &cfg)?;
    let dens = density_local_time(&f, 0.0)?;
    let occ = occupation_local_time(&tg, path.values(), 0.0, eps)?;
    let rel = (occ.terminal() - dens.terminal()).abs() / dens.terminal();
    c.checks.push(Check::at_most("single-path |occupation - density integral| / density integral", rel, 0.1));
    c.info.push(format!("dual path: occupation {:.5}, density integral {:.5}", occ.terminal(), dens.terminal()));
    if let Some(dir) = out {
        io::write_curves(&dir.join("c7_dual_local_time.csv"), &[&occ, &dens])?;
    }
    Ok(c)
}

fn conditional_formula_criterion() -> Result<CriterionOutcome> {
    let mut c = CriterionOutcome::new(8, "conditional Donsker formula");
    let big_t = 1.0;
    let tg = TimeGrid::new(big_t, 1000)?;
    let path = sample_brownian_path(tg, seed(8, 0));
    let mut worst = 0.0f64;
    for j in [0usize, 250, 500, 900] {
        let t = tg.t(j);
        let b = path.value(j);
        let s = (big_t - t).sqrt();
        let q = |g: &dyn Fn(f64) -> f64| composite_gl10(|x| g(x) * brownian_delta_conditional(big_t, t, x, b).unwrap_or(f64::NAN), b - 14.0 * s, b + 14.0 * s, 200);
        let m0 = q(&|_| 1.0);
        let m1 = q(&|x| x);
        let m2 = q(&|x| x * x);
        for (got, want) in [(m0, 1.0), (m1, b), (m2, b * b + big_t - t)] {
            worst = worst.max((got - want).abs());
        }
    }
    c.checks.push(Check::at_most("max |quadrature - {1, B(t), B(t)^2 + T - t}|", worst, 1e-8));
    Ok(c)
}
