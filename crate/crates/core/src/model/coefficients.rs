use std::fmt;
use std::sync::Arc;

use super::grid::DensitySlice;
use crate::error::{domain, invalid, Result};

/// Coefficient of (t, x) and, optionally, the current density slice.
pub type FieldFn = Arc<dyn Fn(f64, f64, Option<&DensitySlice>) -> f64 + Send + Sync>;
/// Coefficient of (t, density slice).
pub type SliceFn = Arc<dyn Fn(f64, &DensitySlice) -> f64 + Send + Sync>;
/// Coefficient of t alone.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A coefficient α(t, μ_t) or β(t, μ_t) that does not depend on x.
#[derive(Clone)]
pub enum MeanFieldCoef {
    Constant(f64),
    Time(TimeFn),
    Functional(SliceFn),
}

impl MeanFieldCoef {
    pub fn eval(&self, t: f64, density: Option<&DensitySlice>) -> Result<f64> {
        match self {
            Self::Constant(c) => Ok(*c),
            Self::Time(f) => Ok(f(t)),
            Self::Functional(f) => density
                .map(|d| f(t, d))
                .ok_or_else(|| invalid("coefficient depends on the density but none was supplied")),
        }
    }

    pub fn uses_density(&self) -> bool {
        matches!(self, Self::Functional(_))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(*c),
            _ => None,
        }
    }
}

impl From<f64> for MeanFieldCoef {
    fn from(c: f64) -> Self {
        Self::Constant(c)
    }
}

impl fmt::Debug for MeanFieldCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Time(_) => write!(f, "Time(<fn>)"),
            Self::Functional(_) => write!(f, "Functional(<fn>)"),
        }
    }
}

/// Drift b and diffusion σ of dX = b(t, X, μ_t) dt + σ(t, X, μ_t) dB.
#[derive(Clone)]
pub enum CoefficientModel {
    General {
        b: FieldFn,
        sigma: FieldFn,
        uses_density: bool,
    },
    /// b = α, σ = β.
    XFree { alpha: MeanFieldCoef, beta: MeanFieldCoef },
    Constant { alpha: f64, beta: f64 },
    /// b = α x, σ = β x on x > 0.
    MeanFieldGbm { alpha: MeanFieldCoef, beta: MeanFieldCoef },
    /// b = α m(t, x), σ = β.
    BurgersDrift { alpha: f64, beta: f64 },
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::General { uses_density, .. } => {
                write!(f, "General {{ uses_density: {uses_density} }}")
            }
            Self::XFree { alpha, beta } => write!(f, "XFree {{ alpha: {alpha:?}, beta: {beta:?} }}"),
            Self::Constant { alpha, beta } => write!(f, "Constant {{ alpha: {alpha}, beta: {beta} }}"),
            Self::MeanFieldGbm { alpha, beta } => {
                write!(f, "MeanFieldGbm {{ alpha: {alpha:?}, beta: {beta:?} }}")
            }
            Self::BurgersDrift { alpha, beta } => {
                write!(f, "BurgersDrift {{ alpha: {alpha}, beta: {beta} }}")
            }
        }
    }
}

impl CoefficientModel {
    pub fn constant(alpha: f64, beta: f64) -> Self {
        Self::Constant { alpha, beta }
    }

    pub fn x_free(alpha: impl Into<MeanFieldCoef>, beta: impl Into<MeanFieldCoef>) -> Self {
        Self::XFree { alpha: alpha.into(), beta: beta.into() }
    }

    pub fn gbm(alpha: impl Into<MeanFieldCoef>, beta: impl Into<MeanFieldCoef>) -> Self {
        Self::MeanFieldGbm { alpha: alpha.into(), beta: beta.into() }
    }

    pub fn burgers(alpha: f64, beta: f64) -> Result<Self> {
        let m = Self::BurgersDrift { alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn general(
        b: impl Fn(f64, f64, Option<&DensitySlice>) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64, f64, Option<&DensitySlice>) -> f64 + Send + Sync + 'static,
        uses_density: bool,
    ) -> Self {
        Self::General { b: Arc::new(b), sigma: Arc::new(sigma), uses_density }
    }

    /// Parameter checks that do not need a state.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::BurgersDrift { alpha, beta } => {
                if *alpha == 0.0 || *beta == 0.0 || !alpha.is_finite() || !beta.is_finite() {
                    return Err(invalid("BurgersDrift requires finite nonzero alpha and beta"));
                }
                Ok(())
            }
            Self::Constant { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() {
                    return Err(invalid("Constant coefficients must be finite"));
                }
                if *beta < 0.0 {
                    return Err(domain("diffusion coefficient beta must be nonnegative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether the coefficients read the current density.
    pub fn uses_density(&self) -> bool {
        match self {
            Self::General { uses_density, .. } => *uses_density,
            Self::XFree { alpha, beta } | Self::MeanFieldGbm { alpha, beta } => {
                alpha.uses_density() || beta.uses_density()
            }
            Self::Constant { .. } => false,
            Self::BurgersDrift { .. } => true,
        }
    }

    /// Whether b and σ are independent of x.
    pub fn is_x_free(&self) -> bool {
        matches!(self, Self::XFree { .. } | Self::Constant { .. })
    }

    pub fn requires_positive_state(&self) -> bool {
        matches!(self, Self::MeanFieldGbm { .. })
    }
}

/// (b(t, x, μ), σ(t, x, μ)).
pub fn eval_coefficients(
    model: &CoefficientModel,
    t: f64,
    x: f64,
    density: Option<&DensitySlice>,
) -> Result<(f64, f64)> {
    let (b, s) = match model {
        CoefficientModel::General { b, sigma, uses_density } => {
            if *uses_density && density.is_none() {
                return Err(invalid("model consumes the density but none was supplied"));
            }
            (b(t, x, density), sigma(t, x, density))
        }
        CoefficientModel::XFree { alpha, beta } => (alpha.eval(t, density)?, beta.eval(t, density)?),
        CoefficientModel::Constant { alpha, beta } => (*alpha, *beta),
        CoefficientModel::MeanFieldGbm { alpha, beta } => {
            if !(x > 0.0) {
                return Err(domain(format!("MeanFieldGbm requires x > 0, got {x}")));
            }
            (alpha.eval(t, density)? * x, beta.eval(t, density)? * x)
        }
        CoefficientModel::BurgersDrift { alpha, beta } => {
            let d = density.ok_or_else(|| invalid("BurgersDrift needs the density slice"))?;
            (alpha * d.at(x), *beta)
        }
    };
    if !b.is_finite() || !s.is_finite() {
        return Err(domain(format!("non-finite coefficients at t = {t}, x = {x}")));
    }
    if s < 0.0 {
        return Err(domain(format!("negative diffusion {s} at t = {t}, x = {x}")));
    }
    Ok((b, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpaceGrid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_examples() {
        let c = CoefficientModel::constant(0.2, 1.0);
        assert_eq!(eval_coefficients(&c, 0.7, -3.0, None).unwrap(), (0.2, 1.0));
        let g = CoefficientModel::gbm(0.1, 0.2);
        let (b, s) = eval_coefficients(&g, 0.0, 2.0, None).unwrap();
        assert_abs_diff_eq!(b, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.4, epsilon = 1e-15);
        let grid = SpaceGrid::new(-1.0, 1.0, 20).unwrap();
        let d = DensitySlice::from_fn(grid, |_| 0.3);
        let bu = CoefficientModel::burgers(1.0, 1.0).unwrap();
        let (b, s) = eval_coefficients(&bu, 0.0, 0.25, Some(&d)).unwrap();
        assert_abs_diff_eq!(b, 0.3, epsilon = 1e-15);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn domain_errors() {
        let g = CoefficientModel::gbm(0.1, 0.2);
        assert!(eval_coefficients(&g, 0.0, 0.0, None).is_err());
        assert!(eval_coefficients(&g, 0.0, -1.0, None).is_err());
        assert!(CoefficientModel::burgers(0.0, 1.0).is_err());
        assert!(CoefficientModel::burgers(1.0, 0.0).is_err());
        let bu = CoefficientModel::burgers(1.0, 1.0).unwrap();
        assert!(eval_coefficients(&bu, 0.0, 0.0, None).is_err());
        let neg = CoefficientModel::general(|_, _, _| 0.0, |_, _, _| -1.0, false);
        assert!(eval_coefficients(&neg, 0.0, 0.0, None).is_err());
    }

    #[test]
    fn mean_field_functional() {
        let grid = SpaceGrid::new(0.0, 1.0, 10).unwrap();
        let d = DensitySlice::from_fn(grid, |_| 1.0);
        let m = CoefficientModel::x_free(MeanFieldCoef::Functional(Arc::new(|_, s: &DensitySlice| s.first_moment())), 1.0);
        assert!(m.uses_density());
        let (b, _) = eval_coefficients(&m, 0.0, 5.0, Some(&d)).unwrap();
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-14);
        assert!(eval_coefficients(&m, 0.0, 5.0, None).is_err());
    }
}
