//! Grid solver for the conditional Fokker-Planck equation
//!
//! ```text
//! dm = { -∂_x[b m] + ½ ∂_x²[σ² m] } dt - ∂_x[σ m] dB
//! ```
//!
//! along one realized path of B. The Itô equation is integrated through
//! its equivalent transport form
//!
//! ```text
//! dm = -∂_x[(b - ½ σ ∂_xσ) m] dt - ∂_x[σ m] ∘ dB,
//! ```
//!
//! whose Itô correction of the noise term is exactly ½ ∂_x²[σ² m]. Each
//! step is a Strang composition D(dt/2) S(dB) D(dt/2) of conservative
//! semi-Lagrangian remaps (see [`remap`]): x-free velocities are exact
//! shifts, linear ones exact dilations, others follow RK4 characteristics.
//! [`NoiseCalculus::Stratonovich`] instead reads the noise term in the
//! Stratonovich sense and keeps the explicit diffusion ½ ∂_x²[σ² m],
//! integrated by Crank-Nicolson.

mod diffusion;
mod field;
pub mod remap;

pub use diffusion::crank_nicolson;
pub use field::{spike, DensityField, FieldOrigin, MassRecord, Probe, StepTrace};
pub use remap::Transport;

use crate::error::{invalid, Error, Result};
use crate::model::{BrownianPath, CoefficientModel, DensitySlice, SpaceGrid, TimeGrid};

/// How the noise term is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseCalculus {
    #[default]
    Ito,
    Stratonovich,
}

/// Sign in front of the noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSign {
    /// -∂_x[σ m] dB.
    #[default]
    Conservative,
    /// +∂_x[σ m] dB.
    Flipped,
}

impl NoiseSign {
    fn factor(self) -> f64 {
        match self {
            Self::Conservative => 1.0,
            Self::Flipped => -1.0,
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FpConfig {
    pub calculus: NoiseCalculus,
    pub sign: NoiseSign,
    /// Bound on max|σ|·|dB_j| / dx.
    pub c_cfl: f64,
    /// Bound on max σ²·dt / dx².
    pub c_diff: f64,
    /// Largest admissible initial value at either boundary node.
    pub boundary_tol: f64,
    /// Initial mass deficits up to this size are renormalized.
    pub renormalize_tol: f64,
    /// Keep every `stride`-th row.
    pub stride: usize,
    /// Points recorded at every step.
    pub probes: Vec<f64>,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self {
            calculus: NoiseCalculus::Ito,
            sign: NoiseSign::Conservative,
            c_cfl: 64.0,
            c_diff: 256.0,
            boundary_tol: 1e-10,
            renormalize_tol: 1e-6,
            stride: 1,
            probes: Vec::new(),
        }
    }
}

/// Trapezoid mass of a slice.
pub fn mass(slice: &DensitySlice) -> f64 {
    slice.mass()
}

/// Solves with the default configuration.
pub fn solve_fp(
    model: &CoefficientModel,
    init: &DensitySlice,
    path: &BrownianPath,
    space_grid: SpaceGrid,
) -> Result<DensityField> {
    solve_fp_with(model, init, path, space_grid, &FpConfig::default())
}

/// Solves along `path` starting from `init`.
pub fn solve_fp_with(
    model: &CoefficientModel,
    init: &DensitySlice,
    path: &BrownianPath,
    space_grid: SpaceGrid,
    cfg: &FpConfig,
) -> Result<DensityField> {
    model.validate()?;
    let grid = space_grid;
    if init.grid != grid {
        return Err(Error::GridMismatch("initial slice is not on the solver grid".into()));
    }
    let tg = *path.time_grid();
    let n = tg.n_steps();
    if cfg.stride == 0 || !n.is_multiple_of(cfg.stride) {
        return Err(invalid(format!("stride {} must divide the step count {n}", cfg.stride)));
    }
    if let Some(p) = cfg.probes.iter().find(|p| !grid.contains(**p)) {
        return Err(invalid(format!("probe {p} lies outside the grid")));
    }
    if model.requires_positive_state() && !(grid.x_min() > 0.0) {
        return Err(invalid("the geometric model needs a grid with x_min > 0"));
    }
    let m0 = prepare_init(init, cfg)?;

    let stepper = Stepper { model, grid, cfg, c: cfg.sign.factor() };
    let init_std = DensitySlice { grid, values: m0.clone() }.central_second_moment().sqrt();

    let mut rows = vec![m0.clone()];
    let mut ledger = vec![record(&grid, 0.0, &m0)];
    let mut probes: Vec<Probe> = cfg
        .probes
        .iter()
        .map(|&x| Probe { x, time_grid: tg, values: vec![interp(&grid, &m0, x)] })
        .collect();
    let mut trace = Vec::with_capacity(n);
    let mut has_trace = true;
    let mut max_sigma = 0.0f64;

    let mut m = m0;
    for j in 0..n {
        let out = stepper.step(j, tg.t(j), tg.dt(), path.increments()[j], &m)?;
        max_sigma = max_sigma.max(out.max_sigma);
        m = out.values;
        if let Some(v) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: j, detail: format!("value {v}") });
        }
        match out.trace {
            Some(t) => trace.push(t),
            None => has_trace = false,
        }
        ledger.push(record(&grid, tg.t(j + 1), &m));
        for p in probes.iter_mut() {
            p.values.push(interp(&grid, &m, p.x));
        }
        if (j + 1) % cfg.stride == 0 {
            rows.push(m.clone());
        }
    }

    let stored = TimeGrid::new(tg.horizon(), n / cfg.stride)?;
    let mut field = DensityField::from_rows(stored, grid, rows)?;
    field.ledger = ledger;
    field.probes = probes;
    field.trace = has_trace.then_some(trace);
    field.warnings = post_run_warnings(&grid, &m, cfg, init_std, max_sigma, path);
    Ok(field)
}

fn prepare_init(init: &DensitySlice, cfg: &FpConfig) -> Result<Vec<f64>> {
    if init.values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial slice has non-finite values"));
    }
    let n = init.values.len();
    let edge = init.values[0].abs().max(init.values[n - 1].abs());
    if edge > cfg.boundary_tol {
        return Err(invalid(format!(
            "initial density {edge:e} at the boundary exceeds {:e}; widen the grid",
            cfg.boundary_tol
        )));
    }
    let mass = init.mass();
    if (mass - 1.0).abs() > cfg.renormalize_tol {
        return Err(invalid(format!("initial slice has mass {mass}, expected 1")));
    }
    Ok(init.values.iter().map(|v| v / mass).collect())
}

fn record(grid: &SpaceGrid, t: f64, m: &[f64]) -> MassRecord {
    MassRecord {
        t,
        mass: grid.trapezoid(m),
        min_value: m.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn interp(grid: &SpaceGrid, m: &[f64], x: f64) -> f64 {
    match grid.locate(x) {
        Some((i, f)) => (1.0 - f) * m[i] + f * m[i + 1],
        None => 0.0,
    }
}

fn post_run_warnings(
    grid: &SpaceGrid,
    last: &[f64],
    cfg: &FpConfig,
    init_std: f64,
    max_sigma: f64,
    path: &BrownianPath,
) -> Vec<String> {
    let mut w = Vec::new();
    let n = last.len();
    let edge = last[0].abs().max(last[n - 1].abs());
    if edge > cfg.boundary_tol {
        w.push(format!("final density {edge:e} at the boundary exceeds {:e}", cfg.boundary_tol));
    }
    let needed = 8.0 * init_std + max_sigma * path.max_abs_value();
    if grid.width() < needed {
        w.push(format!("grid width {} is below the recommended {needed}", grid.width()));
    }
    w
}

struct StepOut {
    values: Vec<f64>,
    trace: Option<StepTrace>,
    max_sigma: f64,
}

struct Stepper<'a> {
    model: &'a CoefficientModel,
    grid: SpaceGrid,
    cfg: &'a FpConfig,
    c: f64,
}

impl Stepper<'_> {
    fn slice(&self, m: &[f64]) -> DensitySlice {
        DensitySlice { grid: self.grid, values: m.to_vec() }
    }

    fn check_cfl(&self, step: usize, sigma_max: f64, db: f64, dt: f64) -> Result<()> {
        let dx = self.grid.dx();
        let adv = sigma_max * db.abs() / dx;
        if adv > self.cfg.c_cfl {
            return Err(Error::Cfl {
                step,
                detail: format!("max|sigma| |dB| / dx = {adv:.3} exceeds {}", self.cfg.c_cfl),
            });
        }
        let dif = sigma_max * sigma_max * dt / (dx * dx);
        if dif > self.cfg.c_diff {
            return Err(Error::Cfl {
                step,
                detail: format!("max sigma^2 dt / dx^2 = {dif:.3} exceeds {}", self.cfg.c_diff),
            });
        }
        Ok(())
    }

    fn strat(&self) -> bool {
        self.cfg.calculus == NoiseCalculus::Stratonovich
    }

    fn diffuse_const(&self, m: Vec<f64>, sigma: f64, tau: f64) -> Vec<f64> {
        if !self.strat() || sigma == 0.0 {
            return m;
        }
        let d = vec![0.5 * sigma * sigma; m.len()];
        crank_nicolson(&self.grid, &m, &d, tau)
    }

    fn diffuse_nodes(&self, m: Vec<f64>, sigma: &[f64], tau: f64) -> Vec<f64> {
        if !self.strat() {
            return m;
        }
        let d: Vec<f64> = sigma.iter().map(|s| 0.5 * s * s).collect();
        crank_nicolson(&self.grid, &m, &d, tau)
    }

    fn step(&self, j: usize, t: f64, dt: f64, db: f64, m: &[f64]) -> Result<StepOut> {
        let g = &self.grid;
        match self.model {
            CoefficientModel::Constant { alpha, beta } => {
                self.check_cfl(j, *beta, db, dt)?;
                let drift = alpha * dt;
                let noise = self.c * beta * db;
                let out = remap::remap(g, m, &Transport::Shift(drift + noise));
                let values = self.diffuse_const(out, *beta, dt);
                Ok(StepOut { values, trace: Some(StepTrace { drift, noise }), max_sigma: *beta })
            }
            CoefficientModel::XFree { alpha, beta } => {
                let dens = self.model.uses_density();
                let s0 = dens.then(|| self.slice(m));
                let a0 = alpha.eval(t, s0.as_ref())?;
                let b0 = nonneg(beta.eval(t, s0.as_ref())?, j)?;
                self.check_cfl(j, b0, db, dt)?;
                let noise = self.c * b0 * db;
                if !dens {
                    let a1 = alpha.eval(t + dt, None)?;
                    let drift = 0.5 * (a0 + a1) * dt;
                    let out = remap::remap(g, m, &Transport::Shift(drift + noise));
                    let values = self.diffuse_const(out, b0, dt);
                    return Ok(StepOut { values, trace: Some(StepTrace { drift, noise }), max_sigma: b0 });
                }
                let m1 = remap::remap(g, m, &Transport::Shift(0.5 * a0 * dt));
                let m1 = self.diffuse_const(m1, b0, 0.5 * dt);
                let m2 = remap::remap(g, &m1, &Transport::Shift(noise));
                let a1 = alpha.eval(t + dt, Some(&self.slice(&m2)))?;
                let m3 = remap::remap(g, &m2, &Transport::Shift(0.5 * a1 * dt));
                let values = self.diffuse_const(m3, b0, 0.5 * dt);
                let drift = 0.5 * (a0 + a1) * dt;
                Ok(StepOut { values, trace: Some(StepTrace { drift, noise }), max_sigma: b0 })
            }
            CoefficientModel::MeanFieldGbm { alpha, beta } => {
                let dens = self.model.uses_density();
                let s0 = dens.then(|| self.slice(m));
                let a0 = alpha.eval(t, s0.as_ref())?;
                let b0 = nonneg(beta.eval(t, s0.as_ref())?, j)?;
                let xmax = g.x_max();
                self.check_cfl(j, b0 * xmax, db, dt)?;
                let corr = if self.strat() { 0.0 } else { 0.5 * b0 * b0 };
                let noise = self.c * b0 * db;
                let sig: Vec<f64> = if self.strat() { g.nodes().iter().map(|x| b0 * x).collect() } else { Vec::new() };
                if !dens {
                    let a1 = alpha.eval(t + dt, None)?;
                    let drift = (0.5 * (a0 + a1) - corr) * dt;
                    let out = remap::remap(g, m, &Transport::Dilation(drift + noise));
                    let values = self.diffuse_nodes(out, &sig, dt);
                    return Ok(StepOut {
                        values,
                        trace: Some(StepTrace { drift, noise }),
                        max_sigma: b0 * xmax,
                    });
                }
                let m1 = remap::remap(g, m, &Transport::Dilation((a0 - corr) * 0.5 * dt));
                let m1 = self.diffuse_nodes(m1, &sig, 0.5 * dt);
                let m2 = remap::remap(g, &m1, &Transport::Dilation(noise));
                let a1 = alpha.eval(t + dt, Some(&self.slice(&m2)))?;
                let m3 = remap::remap(g, &m2, &Transport::Dilation((a1 - corr) * 0.5 * dt));
                let values = self.diffuse_nodes(m3, &sig, 0.5 * dt);
                let drift = (0.5 * (a0 + a1) - corr) * dt;
                Ok(StepOut { values, trace: Some(StepTrace { drift, noise }), max_sigma: b0 * xmax })
            }
            CoefficientModel::BurgersDrift { alpha, beta } => {
                self.check_cfl(j, beta.abs(), db, dt)?;
                let half = |u: &[f64]| -> Vec<f64> {
                    let v0: Vec<f64> = u.iter().map(|v| alpha * v).collect();
                    let mh = remap::remap(g, u, &Transport::Field { velocity: v0, tau: 0.25 * dt });
                    let v1: Vec<f64> = mh.iter().map(|v| alpha * v).collect();
                    let out = remap::remap(g, u, &Transport::Field { velocity: v1, tau: 0.5 * dt });
                    self.diffuse_const(out, *beta, 0.5 * dt)
                };
                let m1 = half(m);
                let m2 = remap::remap(g, &m1, &Transport::Shift(self.c * beta * db));
                let values = half(&m2);
                Ok(StepOut { values, trace: None, max_sigma: beta.abs() })
            }
            CoefficientModel::General { b, sigma, uses_density } => {
                let nodes = g.nodes();
                let s0 = self.slice(m);
                let sref = uses_density.then_some(&s0);
                let sig: Vec<f64> = nodes
                    .iter()
                    .map(|&x| nonneg(sigma(t, x, sref), j))
                    .collect::<Result<_>>()?;
                let smax = sig.iter().fold(0.0f64, |a, s| a.max(*s));
                self.check_cfl(j, smax, db, dt)?;
                let velocity = |tt: f64, u: &[f64]| -> Vec<f64> {
                    let su = self.slice(u);
                    let sr = uses_density.then_some(&su);
                    nodes
                        .iter()
                        .map(|&x| {
                            let drift = b(tt, x, sr);
                            if self.strat() {
                                drift
                            } else {
                                let h = 1e-6 * x.abs().max(1.0);
                                let s = sigma(tt, x, sr);
                                let ds = (sigma(tt, x + h, sr) - sigma(tt, x - h, sr)) / (2.0 * h);
                                drift - 0.5 * s * ds
                            }
                        })
                        .collect()
                };
                let sig_at = |tt: f64, u: &[f64]| -> Vec<f64> {
                    let su = self.slice(u);
                    let sr = uses_density.then_some(&su);
                    nodes.iter().map(|&x| sigma(tt, x, sr)).collect()
                };
                let half = |tt: f64, u: &[f64]| -> Vec<f64> {
                    let v0 = velocity(tt, u);
                    let v = if *uses_density {
                        let mh = remap::remap(g, u, &Transport::Field { velocity: v0, tau: 0.25 * dt });
                        velocity(tt, &mh)
                    } else {
                        v0
                    };
                    let out = remap::remap(g, u, &Transport::Field { velocity: v, tau: 0.5 * dt });
                    if self.strat() {
                        self.diffuse_nodes(out, &sig_at(tt, u), 0.5 * dt)
                    } else {
                        out
                    }
                };
                let m1 = half(t + 0.25 * dt, m);
                let vs: Vec<f64> = sig.iter().map(|s| self.c * s).collect();
                let m2 = remap::remap(g, &m1, &Transport::Field { velocity: vs, tau: db });
                let values = half(t + 0.75 * dt, &m2);
                Ok(StepOut { values, trace: None, max_sigma: smax })
            }
        }
    }
}

fn nonneg(s: f64, step: usize) -> Result<f64> {
    if s.is_finite() && s >= 0.0 {
        Ok(s)
    } else {
        Err(Error::Domain(format!("diffusion coefficient {s} at step {step} is not a nonnegative number")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::shift_delta;
    use crate::model::{sample_brownian_path, InitialLaw};
    use crate::quadrature::normal_pdf;
    use approx::assert_abs_diff_eq;

    fn setup(seed: u64) -> (SpaceGrid, DensitySlice, BrownianPath) {
        let g = SpaceGrid::with_spacing(-8.0, 8.0, 0.02).unwrap();
        let init = InitialLaw::gaussian(0.0, 0.25).unwrap().tabulate(g).unwrap();
        let p = sample_brownian_path(TimeGrid::new(1.0, 1000).unwrap(), seed);
        (g, init, p)
    }

    #[test]
    fn null_dynamics_is_identity() {
        let (g, init, p) = setup(1);
        let f = solve_fp(&CoefficientModel::constant(0.0, 0.0), &init, &p, g).unwrap();
        let m0 = init.values.iter().map(|v| v / init.mass()).collect::<Vec<_>>();
        for r in f.rows() {
            assert_eq!(r, &m0);
        }
    }

    #[test]
    fn deterministic_transport() {
        let (g, init, p) = setup(1);
        let f = solve_fp(&CoefficientModel::constant(0.3, 0.0), &init, &p, g).unwrap();
        let last = f.final_slice();
        let err = (0..g.n_nodes())
            .map(|i| (last.values[i] - normal_pdf(g.x(i) - 0.3, 0.0, 0.25)).abs())
            .fold(0.0, f64::max);
        assert!(err < 4.0 * g.dx() * g.dx(), "sup error {err}");
    }

    #[test]
    fn brownian_shift_does_not_spread() {
        let (g, init, p) = setup(3);
        let f = solve_fp(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g).unwrap();
        for j in [250, 500, 1000] {
            let b = p.value(j);
            let err = (0..g.n_nodes())
                .map(|i| (f.row(j)[i] - shift_delta(|z| normal_pdf(z, 0.0, 0.25), 0.0, b, g.x(i))).abs())
                .fold(0.0, f64::max);
            assert!(err <= 2e-2, "sup error {err} at step {j}");
        }
        assert!(f.mass_drift() <= 1e-12);
        assert_abs_diff_eq!(f.final_slice().central_second_moment(), 0.25, epsilon = 2e-3);
    }

    #[test]
    fn flipped_sign_moves_the_other_way() {
        let (g, init, p) = setup(5);
        let cfg = FpConfig { sign: NoiseSign::Flipped, ..Default::default() };
        let f = solve_fp_with(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g, &cfg).unwrap();
        let mean = f.final_slice().first_moment();
        assert_abs_diff_eq!(mean, -p.terminal(), epsilon = 1e-6);
    }

    #[test]
    fn stratonovich_reading_spreads() {
        let (g, init, p) = setup(3);
        let cfg = FpConfig { calculus: NoiseCalculus::Stratonovich, ..Default::default() };
        let f = solve_fp_with(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g, &cfg).unwrap();
        assert_abs_diff_eq!(f.final_slice().central_second_moment(), 1.25, epsilon = 1e-3);
        assert!(f.mass_drift() <= 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, init, p) = setup(1);
        let wide = SpaceGrid::with_spacing(-1.0, 1.0, 0.02).unwrap();
        let narrow = InitialLaw::gaussian(0.0, 0.25).unwrap().tabulate(wide).unwrap();
        assert!(solve_fp(&CoefficientModel::x_free(0.0, 1.0), &narrow, &p, wide).is_err());
        let half = DensitySlice { grid: g, values: init.values.iter().map(|v| 0.5 * v).collect() };
        assert!(solve_fp(&CoefficientModel::x_free(0.0, 1.0), &half, &p, g).is_err());
        let cfg = FpConfig { c_cfl: 0.1, ..Default::default() };
        assert!(matches!(
            solve_fp_with(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g, &cfg),
            Err(Error::Cfl { .. })
        ));
        assert!(solve_fp(&CoefficientModel::gbm(0.1, 0.2), &init, &p, g).is_err());
    }

    #[test]
    fn general_model_with_constant_coefficients_matches_shift() {
        let (g, init, p) = setup(9);
        let p = p.coarsen().unwrap().coarsen().unwrap();
        let gen = CoefficientModel::general(|_, _, _| 0.2, |_, _, _| 1.0, false);
        let a = solve_fp(&gen, &init, &p, g).unwrap();
        let b = solve_fp(&CoefficientModel::x_free(0.2, 1.0), &init, &p, g).unwrap();
        let d = a
            .final_slice()
            .values
            .iter()
            .zip(&b.final_slice().values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-3, "difference {d}");
    }

    #[test]
    fn stride_and_probes() {
        let (g, init, p) = setup(2);
        let cfg = FpConfig { stride: 10, probes: vec![0.0], ..Default::default() };
        let f = solve_fp_with(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g, &cfg).unwrap();
        assert_eq!(f.n_rows(), 101);
        assert_eq!(f.ledger.len(), 1001);
        let pr = f.probe(0.0).unwrap();
        assert_eq!(pr.values.len(), 1001);
        assert_abs_diff_eq!(pr.values[1000], f.final_slice().at(0.0), epsilon = 1e-15);
        let bad = FpConfig { stride: 7, ..Default::default() };
        assert!(solve_fp_with(&CoefficientModel::x_free(0.0, 1.0), &init, &p, g, &bad).is_err());
    }
}
