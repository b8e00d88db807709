//! Conditional densities (Donsker delta functions) and local times of
//! one-dimensional McKean-Vlasov processes driven by a common Brownian
//! motion.
//!
//! * [`model`]: coefficient families, initial laws, grids, seeded paths.
//! * [`particle`]: interacting particle system sharing one path.
//! * [`fpsolver`]: grid solver for the stochastic Fokker-Planck equation.
//! * [`closedform`]: explicit formulas used as oracles.
//! * [`volterra`]: Picard solver for the stochastic Volterra equation.
//! * [`localtime`]: occupation and density-integral local times.
//! * [`harness`]: configuration, metrics, reports and the acceptance suite.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod fpsolver;
pub mod harness;
pub mod localtime;
pub mod model;
pub mod particle;
pub mod quadrature;
pub mod rng;
pub mod volterra;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
