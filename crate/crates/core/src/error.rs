//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel evaluation, discretization, the event trigger
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A physical or design parameter fails its validity constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects that must share a spatial grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),

    /// The tridiagonal solve hit a zero pivot.
    #[error("linear solve breakdown: {0}")]
    SolveBreakdown(String),

    /// A property that is proved to hold unconditionally was violated at
    /// runtime. This indicates a bug in the numerical scheme, so it aborts
    /// the run with diagnostics instead of being silently tolerated.
    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    /// Bad run configuration.
    #[error("invalid config: {0}")]
    Config(String),

    /// File I/O failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
