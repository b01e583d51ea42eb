//! Crate-wide error type.

use thiserror::Error;

use crate::optimizer::OptimizationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("degenerate instance: c_max equals c_min ({0})")]
    DegenerateInstance(f64),

    #[error("graph has no perfect matching")]
    NoPerfectMatching,

    #[error("unsupported degree {0}: the four-vertex ratio divides by d - 2")]
    UnsupportedDegree(usize),

    #[error("undefined marginal for {0}: register state has zero weight")]
    UndefinedMarginal(String),

    #[error("coverage gap: pairs {0:?} carry nonzero couplings but are not encoded")]
    Coverage(Vec<(usize, usize)>),

    #[error("zero-support conditional slice on pair ({0}, {1})")]
    ZeroSupport(usize, usize),

    #[error("optimization failed after {} evaluations: {reason}", trace.n_eval_used)]
    Optimization {
        reason: String,
        trace: Box<OptimizationTrace>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than a failed computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Dimension(_)
                | Error::ResourceLimit(_)
                | Error::UnsupportedDegree(_)
                | Error::Json(_)
        )
    }
}
