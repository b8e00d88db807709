use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::{DensitySlice, SpaceGrid};
use crate::error::{invalid, Result};
use crate::quadrature::normal_pdf;
use crate::rng::{domain, stream_rng};

/// Tolerance on the trapezoid mass of a tabulated density.
pub const TABULATED_MASS_TOL: f64 = 1e-8;

/// A nonnegative grid density of unit trapezoid mass, read by linear
/// interpolation and zero outside its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    slice: DensitySlice,
    cumulative: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        let slice = DensitySlice::new(grid, values)?;
        if slice.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("tabulated density values must be finite and nonnegative"));
        }
        let mass = slice.mass();
        if (mass - 1.0).abs() > TABULATED_MASS_TOL {
            return Err(invalid(format!("tabulated density has trapezoid mass {mass}, expected 1")));
        }
        let dx = grid.dx();
        let mut cumulative = Vec::with_capacity(grid.n_nodes());
        let mut c = 0.0;
        cumulative.push(c);
        for w in slice.values.windows(2) {
            c += 0.5 * (w[0] + w[1]) * dx;
            cumulative.push(c);
        }
        Ok(Self { slice, cumulative })
    }

    pub fn slice(&self) -> &DensitySlice {
        &self.slice
    }

    pub fn density(&self, z: f64) -> f64 {
        self.slice.at(z)
    }

    /// Quantile of the piecewise-linear density.
    fn quantile(&self, u: f64) -> f64 {
        let total = self.cumulative[self.cumulative.len() - 1];
        let r = u * total;
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&r)) {
            Ok(i) => i.min(self.cumulative.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.cumulative.len() - 2),
        };
        let g = &self.slice.grid;
        let dx = g.dx();
        let m0 = self.slice.values[k];
        let m1 = self.slice.values[k + 1];
        let rem = (r - self.cumulative[k]).max(0.0) / dx;
        let a = 0.5 * (m1 - m0);
        let disc = (m0 * m0 + 4.0 * a * rem).max(0.0);
        let denom = m0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.5 };
        g.x(k) + s.clamp(0.0, 1.0) * dx
    }
}

/// Law of the initial state Z.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Dirac { x0: f64 },
    Gaussian { mean: f64, variance: f64 },
    Tabulated(TabulatedDensity),
    /// ln Z ~ N(mu, sigma²).
    LogNormal { mu: f64, sigma: f64 },
}

impl InitialLaw {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(invalid(format!("gaussian law needs finite mean and positive variance, got {variance}")));
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(invalid("log-normal law needs finite mu and positive sigma"));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Self::Dirac { .. })
    }

    /// Density h(z); a Dirac law has none.
    pub fn density(&self, z: f64) -> Result<f64> {
        match self {
            Self::Dirac { .. } => Err(invalid("a Dirac law has no density; mollify it first")),
            Self::Gaussian { mean, variance } => Ok(normal_pdf(z, *mean, *variance)),
            Self::Tabulated(t) => Ok(t.density(z)),
            Self::LogNormal { mu, sigma } => Ok(if z > 0.0 {
                normal_pdf(z.ln(), *mu, sigma * sigma) / z
            } else {
                0.0
            }),
        }
    }

    /// Density function h, or an error for a Dirac law.
    pub fn density_fn(&self) -> Result<impl Fn(f64) -> f64 + Send + Sync + '_> {
        self.density(0.5)?;
        Ok(move |z| self.density(z).unwrap_or(0.0))
    }

    /// Density of ln Z, defined for the log-normal law.
    pub fn log_density(&self, u: f64) -> Result<f64> {
        match self {
            Self::LogNormal { mu, sigma } => Ok(normal_pdf(u, *mu, sigma * sigma)),
            _ => Err(invalid("log density is defined for the log-normal law only")),
        }
    }

    /// Replaces a Dirac law by N(x0, eps²); other laws are returned as is.
    pub fn mollify(&self, eps: f64) -> Result<Self> {
        match self {
            Self::Dirac { x0 } => Self::gaussian(*x0, eps * eps),
            other => Ok(other.clone()),
        }
    }

    /// Grid values of the density.
    pub fn tabulate(&self, grid: SpaceGrid) -> Result<DensitySlice> {
        self.density(grid.x(0))?;
        Ok(DensitySlice::from_fn(grid, |z| self.density(z).unwrap_or(0.0)))
    }

    /// Mean of the law.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Dirac { x0 } => *x0,
            Self::Gaussian { mean, .. } => *mean,
            Self::Tabulated(t) => t.slice().first_moment() / t.slice().mass(),
            Self::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Dirac { x0 } => *x0,
            Self::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Self::Tabulated(t) => t.quantile(rng.random::<f64>()),
            Self::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
        }
    }

    /// Sample `i` of the family keyed by `seed`.
    pub fn sample_one(&self, seed: u64, i: u64) -> f64 {
        self.draw(&mut stream_rng(seed, domain::INITIAL, i))
    }
}

/// `n` i.i.d. draws; sample `i` comes from its own stream so the result
/// does not depend on how the draws are scheduled.
pub fn sample_initial(law: &InitialLaw, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64).map(|i| law.sample_one(seed, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, s)
    }

    #[test]
    fn dirac_samples() {
        assert_eq!(sample_initial(&InitialLaw::Dirac { x0: 1.5 }, 3, 9), vec![1.5; 3]);
    }

    #[test]
    fn gaussian_moments() {
        let law = InitialLaw::gaussian(0.0, 0.25).unwrap();
        let s = sample_initial(&law, 100_000, 5);
        let (m, v) = moments(&s);
        assert!(m.abs() <= 0.01, "mean {m}");
        assert!((v - 0.25).abs() <= 0.01, "variance {v}");
        assert_eq!(s, sample_initial(&law, 100_000, 5));
    }

    #[test]
    fn tabulated_validation_and_sampling() {
        let g = SpaceGrid::new(0.0, 1.0, 100).unwrap();
        assert!(TabulatedDensity::new(g, vec![0.5; 101]).is_err());
        let mut bad = vec![1.0; 101];
        bad[3] = -1.0;
        assert!(TabulatedDensity::new(g, bad).is_err());
        // triangular density 2x
        let t = TabulatedDensity::new(g, g.tabulate(|x| 2.0 * x)).unwrap();
        let law = InitialLaw::Tabulated(t);
        let s = sample_initial(&law, 50_000, 1);
        assert!(s.iter().all(|x| (0.0..=1.0).contains(x)));
        let (m, _) = moments(&s);
        assert!((m - 2.0 / 3.0).abs() < 0.01, "mean {m}");
        assert_abs_diff_eq!(law.density(0.25).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn dirac_has_no_density() {
        let d = InitialLaw::Dirac { x0: 0.0 };
        assert!(d.density(0.0).is_err());
        let m = d.mollify(0.1).unwrap();
        assert_abs_diff_eq!(m.density(0.0).unwrap(), 1.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn log_normal_positive() {
        let law = InitialLaw::log_normal(0.0, 0.3).unwrap();
        let s = sample_initial(&law, 1000, 2);
        assert!(s.iter().all(|x| *x > 0.0));
        assert_eq!(law.density(-1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(law.log_density(0.0).unwrap(), normal_pdf(0.0, 0.0, 0.09), epsilon = 1e-15);
    }
}
