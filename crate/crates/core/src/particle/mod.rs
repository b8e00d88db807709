//! Interacting particle system driven by one common Brownian path.
//!
//! Every particle uses the same increment dB_j:
//!
//! ```text
//! X_i(t_{j+1}) = X_i(t_j) + b(t_j, X_i, μ_j) dt + σ(t_j, X_i, μ_j) dB_j,
//! ```
//!
//! with μ_j the empirical law of the snapshot. When b and σ do not depend
//! on x every particle receives the same displacement, so the trajectory
//! is stored as the initial samples plus one offset per knot; the
//! geometric model is advanced the same way in log coordinates.

mod kde;

use std::sync::Arc;

use rayon::prelude::*;

pub use kde::{covering_grid, deposit_kde, empirical_density, silverman_bandwidth, DensityEstimate, CLIP_WARN_TOL};

use crate::error::{invalid, Error, Result};
use crate::fpsolver::DensityField;
use crate::model::{sample_initial, BrownianPath, CoefficientModel, DensitySlice, InitialLaw, TimeGrid};

/// How a Burgers-drift particle reads m(t, X_i).
#[derive(Debug, Clone, Default)]
pub enum BurgersClosure {
    /// Kernel estimate of the ensemble itself.
    #[default]
    SelfKde,
    /// A solved field, read at the nearest stored knot.
    Prescribed(Arc<DensityField>),
}

/// Particle run settings.
#[derive(Debug, Clone, Default)]
pub struct ParticleConfig {
    /// Bandwidth for in-run density estimates; `None` applies the
    /// Silverman rule to each snapshot.
    pub bandwidth: Option<f64>,
    pub closure: BurgersClosure,
}

/// Positions at one knot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time_index: usize,
    pub t: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// X_i(t_j) = base_i + offset_j.
    Shifted { base: Vec<f64>, offsets: Vec<f64> },
    /// X_i(t_j) = exp(base_i + offset_j), base_i = ln Z_i.
    LogShifted { base: Vec<f64>, offsets: Vec<f64> },
    Full(Vec<Vec<f64>>),
}

/// All snapshots of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrajectory {
    time_grid: TimeGrid,
    storage: Storage,
}

impl EnsembleTrajectory {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn n_snapshots(&self) -> usize {
        self.time_grid.n_steps() + 1
    }

    pub fn n_particles(&self) -> usize {
        match &self.storage {
            Storage::Shifted { base, .. } | Storage::LogShifted { base, .. } => base.len(),
            Storage::Full(s) => s[0].len(),
        }
    }

    /// Common displacement per knot, for models with x-free coefficients
    /// (log displacement for the geometric model).
    pub fn offsets(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Shifted { offsets, .. } | Storage::LogShifted { offsets, .. } => Some(offsets),
            Storage::Full(_) => None,
        }
    }

    pub fn snapshot(&self, j: usize) -> ParticleEnsemble {
        let positions = match &self.storage {
            Storage::Shifted { base, offsets } => base.iter().map(|z| z + offsets[j]).collect(),
            Storage::LogShifted { base, offsets } => base.iter().map(|z| (z + offsets[j]).exp()).collect(),
            Storage::Full(s) => s[j].clone(),
        };
        ParticleEnsemble { positions, time_index: j, t: self.time_grid.t(j) }
    }

    pub fn final_snapshot(&self) -> ParticleEnsemble {
        self.snapshot(self.time_grid.n_steps())
    }

    /// Path of particle `i` over all knots.
    pub fn particle_path(&self, i: usize) -> Vec<f64> {
        match &self.storage {
            Storage::Shifted { base, offsets } => offsets.iter().map(|o| base[i] + o).collect(),
            Storage::LogShifted { base, offsets } => offsets.iter().map(|o| (base[i] + o).exp()).collect(),
            Storage::Full(s) => s.iter().map(|r| r[i]).collect(),
        }
    }
}

/// Runs with the default configuration.
pub fn simulate_particles(
    model: &CoefficientModel,
    law: &InitialLaw,
    path: &BrownianPath,
    n_particles: usize,
    seed: u64,
) -> Result<EnsembleTrajectory> {
    simulate_particles_with(model, law, path, n_particles, seed, &ParticleConfig::default())
}

/// Euler-Maruyama (exponential Euler for the geometric model) with common noise.
pub fn simulate_particles_with(
    model: &CoefficientModel,
    law: &InitialLaw,
    path: &BrownianPath,
    n_particles: usize,
    seed: u64,
    cfg: &ParticleConfig,
) -> Result<EnsembleTrajectory> {
    if n_particles < 2 {
        return Err(invalid("at least two particles are required"));
    }
    model.validate()?;
    let tg = *path.time_grid();
    let dt = tg.dt();
    let z = sample_initial(law, n_particles, seed);
    let density = |xs: &[f64]| -> Result<DensitySlice> {
        let h = cfg.bandwidth.unwrap_or_else(|| silverman_bandwidth(xs));
        let g = covering_grid(xs, h)?;
        Ok(deposit_kde(xs, &g, h))
    };

    let storage = match model {
        CoefficientModel::Constant { .. } | CoefficientModel::XFree { .. } => {
            let mut offsets = Vec::with_capacity(tg.n_steps() + 1);
            let mut d = 0.0;
            offsets.push(d);
            for j in 0..tg.n_steps() {
                let snap = if model.uses_density() {
                    let xs: Vec<f64> = z.iter().map(|v| v + d).collect();
                    Some(density(&xs)?)
                } else {
                    None
                };
                let (a, b) = x_free_coefs(model, tg.t(j), snap.as_ref())?;
                d += a * dt + b * path.increments()[j];
                offsets.push(d);
            }
            Storage::Shifted { base: z, offsets }
        }
        CoefficientModel::MeanFieldGbm { alpha, beta } => {
            if let Some(v) = z.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::Domain(format!("geometric model needs positive initial states, got {v}")));
            }
            let base: Vec<f64> = z.iter().map(|v| v.ln()).collect();
            let mut offsets = Vec::with_capacity(tg.n_steps() + 1);
            let mut d = 0.0;
            offsets.push(d);
            for j in 0..tg.n_steps() {
                let snap = if model.uses_density() {
                    let xs: Vec<f64> = base.iter().map(|v| (v + d).exp()).collect();
                    Some(density(&xs)?)
                } else {
                    None
                };
                let a = alpha.eval(tg.t(j), snap.as_ref())?;
                let b = beta.eval(tg.t(j), snap.as_ref())?;
                if !(b >= 0.0) {
                    return Err(Error::Domain(format!("negative diffusion {b} at step {j}")));
                }
                d += (a - 0.5 * b * b) * dt + b * path.increments()[j];
                offsets.push(d);
            }
            Storage::LogShifted { base, offsets }
        }
        CoefficientModel::BurgersDrift { alpha, beta } => {
            let mut snaps = Vec::with_capacity(tg.n_steps() + 1);
            snaps.push(z);
            for j in 0..tg.n_steps() {
                let cur = &snaps[j];
                let slice = match &cfg.closure {
                    BurgersClosure::SelfKde => density(cur)?,
                    BurgersClosure::Prescribed(f) => {
                        let k = f.time_grid().nearest(tg.t(j));
                        f.slice(k)
                    }
                };
                let db = path.increments()[j];
                let next: Vec<f64> = cur
                    .par_iter()
                    .with_min_len(1024)
                    .map(|&x| x + alpha * slice.at(x) * dt + beta * db)
                    .collect();
                snaps.push(next);
            }
            Storage::Full(snaps)
        }
        CoefficientModel::General { b, sigma, uses_density } => {
            let mut snaps = Vec::with_capacity(tg.n_steps() + 1);
            snaps.push(z);
            for j in 0..tg.n_steps() {
                let cur = &snaps[j];
                let slice = if *uses_density { Some(density(cur)?) } else { None };
                let t = tg.t(j);
                let db = path.increments()[j];
                let next: Vec<f64> = cur
                    .par_iter()
                    .with_min_len(1024)
                    .map(|&x| x + b(t, x, slice.as_ref()) * dt + sigma(t, x, slice.as_ref()) * db)
                    .collect();
                if let Some((i, v)) = next.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(Error::Degenerate {
                        step: j,
                        detail: format!("particle {i} reached {v}"),
                    });
                }
                snaps.push(next);
            }
            Storage::Full(snaps)
        }
    };
    Ok(EnsembleTrajectory { time_grid: tg, storage })
}

fn x_free_coefs(model: &CoefficientModel, t: f64, d: Option<&DensitySlice>) -> Result<(f64, f64)> {
    let (a, b) = match model {
        CoefficientModel::Constant { alpha, beta } => (*alpha, *beta),
        CoefficientModel::XFree { alpha, beta } => (alpha.eval(t, d)?, beta.eval(t, d)?),
        _ => unreachable!("x-free models only"),
    };
    if !(b >= 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("coefficients ({a}, {b}) at t = {t} are not admissible")));
    }
    Ok((a, b))
}

/// (1/N) Σ g(X_i).
pub fn conditional_expectation(ensemble: &ParticleEnsemble, g: impl Fn(f64) -> f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    let mut s = 0.0;
    for &x in &ensemble.positions {
        let v = g(x);
        if !v.is_finite() {
            return Err(invalid(format!("g({x}) = {v} is not finite")));
        }
        s += v;
    }
    Ok(s / ensemble.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{shift_delta, PathFunctionals};
    use crate::model::{sample_brownian_path, SpaceGrid};
    use crate::quadrature::normal_pdf;
    use approx::assert_abs_diff_eq;

    fn path(seed: u64, n: usize) -> BrownianPath {
        sample_brownian_path(TimeGrid::new(1.0, n).unwrap(), seed)
    }

    #[test]
    fn deterministic_transport() {
        let tr = simulate_particles(&CoefficientModel::constant(1.0, 0.0), &InitialLaw::Dirac { x0: 0.0 }, &path(1, 100), 10, 2).unwrap();
        for x in tr.final_snapshot().positions {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn common_noise_rigidity() {
        let law = InitialLaw::gaussian(0.0, 0.25).unwrap();
        let p = path(3, 200);
        let tr = simulate_particles(&CoefficientModel::x_free(0.2, 1.0), &law, &p, 100, 4).unwrap();
        let z = tr.snapshot(0).positions;
        for j in [1, 50, 200] {
            let x = tr.snapshot(j).positions;
            for i in 1..z.len() {
                let tol = 4.0 * f64::EPSILON * (x[i].abs() + x[0].abs() + z[i].abs() + z[0].abs());
                assert!(((x[i] - x[0]) - (z[i] - z[0])).abs() <= tol);
            }
        }
        assert_eq!(tr.n_snapshots(), 201);
    }

    #[test]
    fn mean_is_shifted_initial_mean() {
        let law = InitialLaw::gaussian(0.0, 0.25).unwrap();
        let p = path(5, 100);
        let tr = simulate_particles(&CoefficientModel::x_free(0.2, 1.0), &law, &p, 1000, 6).unwrap();
        let pf = PathFunctionals::constant(0.2, 1.0, &p);
        let z = tr.snapshot(0);
        let mz = conditional_expectation(&z, |x| x).unwrap();
        let fin = tr.final_snapshot();
        assert_eq!(conditional_expectation(&fin, |_| 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(conditional_expectation(&fin, |x| x).unwrap(), mz + pf.shift(100), epsilon = 1e-12);
        assert!(conditional_expectation(&fin, |x| 1.0 / (x - x)).is_err());
    }

    #[test]
    fn brownian_shift_kde() {
        let law = InitialLaw::gaussian(0.0, 0.25).unwrap();
        let p = path(7, 1000);
        let tr = simulate_particles(&CoefficientModel::x_free(0.0, 1.0), &law, &p, 100_000, 8).unwrap();
        let fin = tr.final_snapshot();
        let g = SpaceGrid::with_spacing(-8.0, 8.0, 0.02).unwrap();
        let est = empirical_density(&fin.positions, &g, silverman_bandwidth(&fin.positions)).unwrap();
        let diff: Vec<f64> = (0..g.n_nodes())
            .map(|i| (est.slice.values[i] - shift_delta(|z| normal_pdf(z, 0.0, 0.25), 0.0, p.terminal(), g.x(i))).abs())
            .collect();
        assert!(g.trapezoid(&diff) <= 5e-2);
    }

    #[test]
    fn median_indicator() {
        let law = InitialLaw::gaussian(0.0, 1.0).unwrap();
        let e = ParticleEnsemble { positions: sample_initial(&law, 100_000, 9), time_index: 0, t: 0.0 };
        let q = conditional_expectation(&e, |x| if x >= 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert!((q - 0.5).abs() <= 5e-3);
    }

    #[test]
    fn gbm_positive() {
        let law = InitialLaw::log_normal(0.0, 0.3).unwrap();
        let tr = simulate_particles(&CoefficientModel::gbm(0.05, 0.2), &law, &path(2, 100), 1000, 1).unwrap();
        for j in 0..=100 {
            assert!(tr.snapshot(j).positions.iter().all(|x| *x > 0.0));
        }
    }

    #[test]
    fn general_and_burgers_runs() {
        let law = InitialLaw::gaussian(0.0, 1.0).unwrap();
        let p = path(2, 50);
        let gen = CoefficientModel::general(|_, x, _| -x, |_, _, _| 0.5, false);
        let tr = simulate_particles(&gen, &law, &p, 500, 3).unwrap();
        assert_eq!(tr.n_snapshots(), 51);
        let bu = CoefficientModel::burgers(1.0, 1.0).unwrap();
        let tr = simulate_particles(&bu, &law, &p, 2000, 3).unwrap();
        assert!(tr.final_snapshot().positions.iter().all(|x| x.is_finite()));
        let blow = CoefficientModel::general(|_, x, _| x * x * 1e300, |_, _, _| 0.0, false);
        let law1 = InitialLaw::gaussian(3.0, 1e-4).unwrap();
        assert!(matches!(simulate_particles(&blow, &law1, &p, 10, 1), Err(Error::Degenerate { .. })));
        assert!(simulate_particles(&gen, &law, &p, 1, 3).is_err());
    }
}
