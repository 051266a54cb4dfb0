//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, numeric evaluation and search.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violates its documented range (negative rate, probability
    /// outside `[0, 1)`, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point lies outside the domain of the requested
    /// operation (CGF argument at or beyond the convergence bound, CDF
    /// argument below the support, compression ratio outside `[1, k_max]`).
    #[error("domain violation: {0}")]
    Domain(String),

    /// The saddlepoint bracket could not be expanded far enough to the left:
    /// the target lies below the reachable range of `K'`. For CDF work this
    /// means the probability underflows to zero.
    #[error("saddlepoint bracket exhausted at s = {reached:e} for target {target:e}")]
    BracketExhausted { target: f64, reached: f64 },

    /// An iterative method failed to converge.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// The operation is meaningless for the given model (e.g. a density for
    /// a purely lattice-valued sum).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Inconsistent or unusable scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The optimization problem has an empty feasible set.
    #[error("infeasible: binding constraint `{binding}`: {detail}")]
    Infeasible { binding: String, detail: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
