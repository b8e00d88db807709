//! Local time at a level, from band occupation of a path and as the time
//! integral of a conditional density.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fpsolver::{DensityField, FieldOrigin};
use crate::model::TimeGrid;
use crate::quadrature::{adaptive_simpson, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimeEstimator {
    Occupation,
    DensityIntegral,
}

impl LocalTimeEstimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::Occupation => "occupation",
            Self::DensityIntegral => "density_integral",
        }
    }
}

/// L(t_j) at a fixed level x.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeCurve {
    pub time_grid: TimeGrid,
    pub x: f64,
    pub values: Vec<f64>,
    pub estimator: LocalTimeEstimator,
    pub epsilon: Option<f64>,
    pub warnings: Vec<String>,
}

impl LocalTimeCurve {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("curve has at least one knot")
    }

    /// L(t_b) - L(t_a).
    pub fn increment(&self, a: usize, b: usize) -> f64 {
        self.values[b] - self.values[a]
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Band width max(2√dt, 4·dx).
pub fn default_epsilon(dt: f64, dx: f64) -> f64 {
    (2.0 * dt.sqrt()).max(4.0 * dx)
}

/// (1/2ε)·λ{s ≤ t_j : |X(s) - x| < ε} for the piecewise-linear interpolant
/// of the sampled path.
pub fn occupation_local_time(time_grid: &TimeGrid, values: &[f64], x: f64, epsilon: f64) -> Result<LocalTimeCurve> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let n = time_grid.n_steps();
    if values.len() != n + 1 {
        return Err(invalid(format!("path has {} values for {} knots", values.len(), n + 1)));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("path value {v} is not finite")));
    }
    let dt = time_grid.dt();
    let scale = dt / (2.0 * epsilon);
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += scale * band_fraction(w[0] - x, w[1] - x, epsilon);
        out.push(acc);
    }
    let mut warnings = Vec::new();
    if n > 0 {
        let typical = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / n as f64;
        if epsilon < 0.5 * typical {
            warnings.push(format!("band half-width {epsilon} is below half the typical step displacement {typical}"));
        }
    }
    Ok(LocalTimeCurve {
        time_grid: *time_grid,
        x,
        values: out,
        estimator: LocalTimeEstimator::Occupation,
        epsilon: Some(epsilon),
        warnings,
    })
}

/// Average of [`occupation_local_time`] over the paths `path(0..n)`.
///
/// Sums run over fixed chunks in index order, so the result does not
/// depend on the worker count.
pub fn mean_occupation_local_time(
    time_grid: &TimeGrid,
    n: usize,
    path: impl Fn(usize) -> Vec<f64> + Sync,
    x: f64,
    epsilon: f64,
) -> Result<LocalTimeCurve> {
    if n == 0 {
        return Err(invalid("no paths to average"));
    }
    let idx: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = idx
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = vec![0.0; time_grid.n_steps() + 1];
            for &i in chunk {
                let c = occupation_local_time(time_grid, &path(i), x, epsilon)?;
                for (a, v) in acc.iter_mut().zip(&c.values) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; time_grid.n_steps() + 1];
    for p in partials {
        for (a, v) in values.iter_mut().zip(p) {
            *a += v;
        }
    }
    for v in values.iter_mut() {
        *v /= n as f64;
    }
    Ok(LocalTimeCurve {
        time_grid: *time_grid,
        x,
        values,
        estimator: LocalTimeEstimator::Occupation,
        epsilon: Some(epsilon),
        warnings: Vec::new(),
    })
}

/// Fraction of θ ∈ [0, 1] with |a + θ(b - a)| < ε.
fn band_fraction(a: f64, b: f64, eps: f64) -> f64 {
    let d = b - a;
    if d == 0.0 {
        return if a.abs() < eps { 1.0 } else { 0.0 };
    }
    let t1 = (-eps - a) / d;
    let t2 = (eps - a) / d;
    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    (hi.min(1.0) - lo.max(0.0)).max(0.0)
}

/// ∫₀^{t_j} m(s, x) ds by the trapezoid rule in time, m read by linear
/// interpolation in x (or from a probe recorded at x).
///
/// A point-source field integrates its first interval analytically
/// against the Gaussian it stands for.
pub fn density_local_time(field: &DensityField, x: f64) -> Result<LocalTimeCurve> {
    let grid = field.space_grid();
    if !grid.contains(x) {
        return Err(invalid(format!("x = {x} lies outside [{}, {}]", grid.x_min(), grid.x_max())));
    }
    let (tg, column): (TimeGrid, Vec<f64>) = match field.probe(x) {
        Some(p) => (p.time_grid, p.values.clone()),
        None => (*field.time_grid(), field.rows().iter().map(|r| interp(field, r, x)).collect()),
    };
    let dt = tg.dt();
    let n = tg.n_steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for j in 0..n {
        let piece = match (j, field.origin) {
            (0, FieldOrigin::PointSource { x0, variance0, diffusivity }) => {
                point_source_integral(x - x0, variance0, diffusivity, dt)
            }
            (0, FieldOrigin::Regular) if !column[0].is_finite() => column[1] * dt,
            _ => 0.5 * dt * (column[j] + column[j + 1]),
        };
        acc += piece;
        out.push(acc);
    }
    Ok(LocalTimeCurve {
        time_grid: tg,
        x,
        values: out,
        estimator: LocalTimeEstimator::DensityIntegral,
        epsilon: None,
        warnings: Vec::new(),
    })
}

fn interp(field: &DensityField, row: &[f64], x: f64) -> f64 {
    match field.space_grid().locate(x) {
        Some((i, f)) => (1.0 - f) * row[i] + f * row[i + 1],
        None => 0.0,
    }
}

/// ∫₀^τ N(d; 0, v0 + D s) ds.
fn point_source_integral(d: f64, v0: f64, diffusivity: f64, tau: f64) -> f64 {
    if diffusivity == 0.0 {
        return tau * normal_pdf(d, 0.0, v0);
    }
    (heat_primitive(d, v0 + diffusivity * tau) - heat_primitive(d, v0)) / diffusivity
}

/// G(τ) = ∫₀^τ N(d; 0, u) du = √(2τ/π) e^{-d²/2τ} - |d| erfc(|d|/√(2τ)).
fn heat_primitive(d: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let a = d.abs();
    (2.0 * tau / PI).sqrt() * (-d * d / (2.0 * tau)).exp() - a * libm::erfc(a / (2.0 * tau).sqrt())
}

/// E[L_t(x)] for Brownian motion started at z: ∫₀ᵗ (2πs)^{-1/2} e^{-(x-z)²/2s} ds.
///
/// Evaluated as √(2/π) ∫₀^{√t} e^{-d²/2u²} du, which has a bounded integrand.
pub fn expected_local_time_bm(t: f64, x: f64, z: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let d2 = (x - z) * (x - z);
    let f = |u: f64| if u == 0.0 { if d2 == 0.0 { 1.0 } else { 0.0 } } else { (-d2 / (2.0 * u * u)).exp() };
    (2.0 / PI).sqrt() * adaptive_simpson(&f, 0.0, t.sqrt(), 1e-13)
}
