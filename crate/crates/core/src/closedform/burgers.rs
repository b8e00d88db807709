//! Cole-Hopf representation of the Burgers-drift conditional density.
//!
//! With γ = -β²/(2α) and k(x) = exp(H₀(x)/γ), H₀(x) = ∫₀ˣ h(y) dy,
//!
//! ```text
//! φ(t, x) = Ẽ[k(x - β B(t) + β B̃(t))],    m(t, x) = γ φ_x(t, x) / φ(t, x),
//! ```
//!
//! where B̃ is an auxiliary Brownian motion. The expectation is a
//! Gauss-Hermite sum; φ_x applies the same sum to a central difference of k.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{DensitySlice, SpaceGrid};
use crate::quadrature::{adaptive_simpson, gauss_legendre10, GaussHermite};

pub const DEFAULT_HERMITE_ORDER: usize = 64;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
const H0_TOL: f64 = 1e-14;

/// α, β and γ = -β²/(2α).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BurgersParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha == 0.0 || beta == 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(invalid("Burgers parameters need finite nonzero alpha and beta"));
        }
        Ok(Self { alpha, beta, gamma: -beta * beta / (2.0 * alpha) })
    }
}

/// A positive function used inside the Feynman-Kac expectation.
pub trait ColeHopfKernel: Sync {
    fn value(&self, y: f64) -> f64;

    /// Central difference (k(y + δ) - k(y - δ)) / (2δ).
    fn slope(&self, y: f64, delta: f64) -> f64 {
        (self.value(y + delta) - self.value(y - delta)) / (2.0 * delta)
    }
}

impl<F: Fn(f64) -> f64 + Sync> ColeHopfKernel for F {
    fn value(&self, y: f64) -> f64 {
        self(y)
    }
}

/// k(x) = exp(H₀(x)/γ) for a density h.
///
/// The central difference is written as
/// k(y)·[expm1(I₊/γ) - expm1(-I₋/γ)]/(2δ) with I± the integrals of h over
/// the two half-steps, which is the same difference without cancelling two
/// separately integrated values of H₀.
pub struct BurgersK<H> {
    h: H,
    gamma: f64,
}

impl<H: Fn(f64) -> f64 + Sync> BurgersK<H> {
    pub fn new(h: H, gamma: f64) -> Result<Self> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(invalid("gamma must be finite and nonzero"));
        }
        Ok(Self { h, gamma })
    }

    /// H₀(x) = ∫₀ˣ h, signed for x < 0.
    pub fn primitive(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        const PANEL: f64 = 1.0;
        let n = (x.abs() / PANEL).ceil().max(1.0) as usize;
        let step = x / n as f64;
        (0..n)
            .map(|i| {
                let a = step * i as f64;
                adaptive_simpson(&self.h, a, a + step, H0_TOL)
            })
            .sum()
    }
}

impl<H: Fn(f64) -> f64 + Sync> ColeHopfKernel for BurgersK<H> {
    fn value(&self, y: f64) -> f64 {
        (self.primitive(y) / self.gamma).exp()
    }

    fn slope(&self, y: f64, delta: f64) -> f64 {
        let ip = gauss_legendre10(&self.h, y, y + delta);
        let im = gauss_legendre10(&self.h, y - delta, y);
        let g = self.gamma;
        self.value(y) * ((ip / g).exp_m1() - (-im / g).exp_m1()) / (2.0 * delta)
    }
}

/// exp((1/γ) ∫₀ˣ h).
pub fn burgers_k(h: impl Fn(f64) -> f64 + Sync, gamma: f64, x: f64) -> Result<f64> {
    Ok(BurgersK::new(h, gamma)?.value(x))
}

/// Gauss-Hermite evaluator of φ and φ_x.
#[derive(Debug, Clone)]
pub struct ColeHopf {
    rule: GaussHermite,
    fd_step: f64,
}

impl Default for ColeHopf {
    fn default() -> Self {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        Self {
            rule: RULE.get_or_init(|| GaussHermite::new(DEFAULT_HERMITE_ORDER)).clone(),
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

impl ColeHopf {
    pub fn new(order: usize, fd_step: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("Gauss-Hermite order must be positive"));
        }
        if !(fd_step > 0.0) {
            return Err(invalid("finite-difference step must be positive"));
        }
        Ok(Self { rule: GaussHermite::new(order), fd_step })
    }

    /// (φ, φ_x) at (t, x) given B(t) = b_t.
    pub fn phi(&self, k: &impl ColeHopfKernel, beta: f64, t: f64, b_t: f64, x: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(invalid(format!("Feynman-Kac expectation needs t >= 0, got {t}")));
        }
        let center = x - beta * b_t;
        let (phi, phi_x) = if t == 0.0 {
            (k.value(center), k.slope(center, self.fd_step))
        } else {
            let s = beta * t.sqrt();
            let mut p = 0.0;
            let mut px = 0.0;
            for (&u, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let y = center + s * u;
                p += w * k.value(y);
                px += w * k.slope(y, self.fd_step);
            }
            (p, px)
        };
        if !(phi.is_finite() && phi_x.is_finite()) || phi <= 0.0 {
            return Err(Error::Quadrature(format!(
                "phi = {phi}, phi_x = {phi_x} at t = {t}, x = {x}, b_t = {b_t}"
            )));
        }
        Ok((phi, phi_x))
    }
}

/// (φ, φ_x) with the default rule (order 64, step 1e-5).
pub fn cole_hopf_phi(k: &impl ColeHopfKernel, beta: f64, t: f64, b_t: f64, x: f64) -> Result<(f64, f64)> {
    ColeHopf::default().phi(k, beta, t, b_t, x)
}

/// γ φ_x / φ.
pub fn burgers_delta(
    h: impl Fn(f64) -> f64 + Sync,
    params: BurgersParams,
    t: f64,
    b_t: f64,
    x: f64,
) -> Result<f64> {
    let k = BurgersK::new(h, params.gamma)?;
    let (p, px) = cole_hopf_phi(&k, params.beta, t, b_t, x)?;
    Ok(params.gamma * px / p)
}

/// [`burgers_delta`] tabulated on a grid.
pub fn burgers_slice(
    h: impl Fn(f64) -> f64 + Sync,
    params: BurgersParams,
    t: f64,
    b_t: f64,
    grid: SpaceGrid,
    evaluator: &ColeHopf,
) -> Result<DensitySlice> {
    let k = BurgersK::new(h, params.gamma)?;
    let values = (0..grid.n_nodes())
        .into_par_iter()
        .map(|i| {
            evaluator
                .phi(&k, params.beta, t, b_t, grid.x(i))
                .map(|(p, px)| params.gamma * px / p)
        })
        .collect::<Result<Vec<f64>>>()?;
    DensitySlice::new(grid, values)
}
