use thiserror::Error;

/// Errors raised by the solvers, oracles and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside its documented range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A coefficient or density queried outside its admissible domain.
    #[error("domain violation: {0}")]
    Domain(String),

    /// The configured stability bound was exceeded.
    #[error("CFL violation at step {step}: {detail}")]
    Cfl { step: usize, detail: String },

    /// A non-finite value appeared in a solver state.
    #[error("solver blow-up at step {step}: {detail}")]
    Blowup { step: usize, detail: String },

    /// A particle left the admissible domain.
    #[error("degenerate particle run at step {step}: {detail}")]
    Degenerate { step: usize, detail: String },

    /// Fixed-point iteration stopped at `max_iter` above tolerance.
    #[error("no convergence after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    /// Quadrature produced an unusable value.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Two grids that must agree do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
