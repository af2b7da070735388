//! Error taxonomy shared by all solver and diagnostic entry points.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how callers are expected to react: argument and
/// configuration errors are programming/usage mistakes, convergence errors
/// carry iteration evidence and may be retried with different options, and
/// `NotSeparated` signals that a structural assumption of the spectral
/// decomposition does not hold for the supplied operator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// An iterative solver ran out of iterations. The message records the
    /// iteration count and the final residual.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The per-step implicit solve failed; the message records the step index.
    #[error("implicit step failed: {0}")]
    StiffStep(String),

    /// An eigenvalue lies on (or within tolerance of) the splitting line, so
    /// the requested spectral decomposition does not exist.
    #[error("spectral separation violated: {0}")]
    NotSeparated(String),

    #[error("fit unavailable: {0}")]
    FitUnavailable(String),

    /// The requested diagnostic is undefined for the given data (for example
    /// a semigroup certificate for a non-Hurwitz operator).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line interface.
    ///
    /// 2 = usage/configuration, 3 = solver non-convergence,
    /// 4 = violated structural assumption, 1 = anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::NoConvergence(_) | Error::StiffStep(_) => 3,
            Error::NotSeparated(_) => 4,
            _ => 1,
        }
    }
}
