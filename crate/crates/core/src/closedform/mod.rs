//! Explicit Donsker delta formulas used as oracles.
//!
//! * Brownian motion: E[δ_{B(t)}(x)] is the heat kernel, and
//!   E[δ_{B(T)}(x) | F_t] is the heat kernel centered at B(t) with
//!   variance T - t.
//! * Coefficients free of x: the conditional density is the translate
//!   h(x - A(t) - M(t)) with A = ∫α ds and M = ∫β dB.
//! * Geometric case: m_t(x) = H(ln x - a_t - m_t) / x with H the density of
//!   ln Z; the caller chooses the log-drift a_t.
//! * Burgers drift: m = γ φ_x / φ through the Cole-Hopf substitution (see
//!   [`burgers`]).

mod burgers;

pub use burgers::{
    burgers_delta, burgers_k, burgers_slice, cole_hopf_phi, BurgersK, BurgersParams, ColeHopf,
    ColeHopfKernel, DEFAULT_FD_STEP, DEFAULT_HERMITE_ORDER,
};

use crate::error::{domain, invalid, Result};
use crate::model::{BrownianPath, DensitySlice, SpaceGrid};
use crate::quadrature::normal_pdf;

/// Mass deficit above which [`reconstruct_state`] attaches a warning.
pub const STATE_MASS_TOL: f64 = 1e-4;

/// E[δ_{B(t)}(x)] for B started at z.
pub fn brownian_delta_expectation(t: f64, x: f64, z: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(normal_pdf(x, z, t))
}

/// E[δ_{B(T)}(x) | F_t] given B(t) = b_t.
pub fn brownian_delta_conditional(big_t: f64, t: f64, x: f64, b_t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < big_t) {
        return Err(invalid(format!("conditional kernel needs 0 <= t < T, got t = {t}, T = {big_t}")));
    }
    Ok(normal_pdf(x, b_t, big_t - t))
}

/// h(x - a_t - m_t).
pub fn shift_delta(h: impl Fn(f64) -> f64, a_t: f64, m_t: f64, x: f64) -> f64 {
    h(x - a_t - m_t)
}

/// H(ln x - a_t - m_t) / x.
pub fn gbm_delta(big_h: impl Fn(f64) -> f64, a_t: f64, m_t: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain(format!("geometric density needs x > 0, got {x}")));
    }
    Ok(big_h(x.ln() - a_t - m_t) / x)
}

/// A(t_j) = ∫α ds and M(t_j) = ∫β dB along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    pub a: Vec<f64>,
    pub m: Vec<f64>,
}

impl PathFunctionals {
    /// Constant coefficients: A = α t, M = β B(t).
    pub fn constant(alpha: f64, beta: f64, path: &BrownianPath) -> Self {
        let tg = path.time_grid();
        Self {
            a: tg.knots().iter().map(|t| alpha * t).collect(),
            m: path.values().iter().map(|b| beta * b).collect(),
        }
    }

    /// Time-dependent coefficients: trapezoid drift integral, left-point
    /// stochastic integral.
    pub fn from_fns(alpha: impl Fn(f64) -> f64, beta: impl Fn(f64) -> f64, path: &BrownianPath) -> Self {
        let tg = path.time_grid();
        let alphas: Vec<f64> = tg.knots().iter().map(|&t| alpha(t)).collect();
        let betas: Vec<f64> = (0..tg.n_steps()).map(|j| beta(tg.t(j))).collect();
        Self::from_samples(&alphas, &betas, path).expect("lengths match")
    }

    /// From α at every knot (n + 1 values) and β at every left point (n values).
    pub fn from_samples(alphas: &[f64], betas: &[f64], path: &BrownianPath) -> Result<Self> {
        let tg = path.time_grid();
        let n = tg.n_steps();
        if alphas.len() != n + 1 || betas.len() != n {
            return Err(invalid("path functionals need n + 1 drift samples and n diffusion samples"));
        }
        let dt = tg.dt();
        let mut a = vec![0.0; n + 1];
        let mut m = vec![0.0; n + 1];
        for j in 0..n {
            a[j + 1] = a[j] + 0.5 * (alphas[j] + alphas[j + 1]) * dt;
            m[j + 1] = m[j] + betas[j] * path.increments()[j];
        }
        Ok(Self { a, m })
    }

    pub fn shift(&self, j: usize) -> f64 {
        self.a[j] + self.m[j]
    }
}

/// Result of [`reconstruct_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub value: f64,
    pub mass: f64,
    pub warning: Option<String>,
}

/// X(t) = ∫ x m(t, x) dx by the trapezoid rule.
pub fn reconstruct_state(slice: &DensitySlice) -> StateEstimate {
    let mass = slice.mass();
    let warning = ((mass - 1.0).abs() > STATE_MASS_TOL)
        .then(|| format!("slice mass {mass} deviates from 1 by more than {STATE_MASS_TOL}"));
    StateEstimate { value: slice.first_moment(), mass, warning }
}

/// Tabulates the translate h(x - shift) on a grid.
pub fn shift_slice(h: impl Fn(f64) -> f64, shift: f64, grid: SpaceGrid) -> DensitySlice {
    DensitySlice::from_fn(grid, |x| shift_delta(&h, shift, 0.0, x))
}

/// Tabulates the geometric density on a grid of positive nodes (zero at x <= 0).
pub fn gbm_slice(big_h: impl Fn(f64) -> f64, a_t: f64, m_t: f64, grid: SpaceGrid) -> DensitySlice {
    DensitySlice::from_fn(grid, |x| gbm_delta(&big_h, a_t, m_t, x).unwrap_or(0.0))
}
