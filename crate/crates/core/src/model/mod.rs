//! Model families, initial laws, lattices and the common Brownian path.
//!
//! The state follows the one-dimensional mean-field equation
//!
//! ```text
//! dX(t) = b(t, X(t), μ_t) dt + σ(t, X(t), μ_t) dB(t),   X(0) = Z,
//! ```
//!
//! where μ_t is the conditional law of X(t) given the path of B and Z is
//! independent of B.

mod coefficients;
mod grid;
mod law;
mod path;

pub use coefficients::{eval_coefficients, CoefficientModel, FieldFn, MeanFieldCoef, SliceFn, TimeFn};
pub use grid::{DensitySlice, SpaceGrid};
pub use law::{sample_initial, InitialLaw, TabulatedDensity, TABULATED_MASS_TOL};
pub use path::{sample_brownian_path, BrownianPath, TimeGrid};
