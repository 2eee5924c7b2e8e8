use thiserror::Error;

/// Errors raised by the approximation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {0} of the system matrix has zero norm")]
    ZeroColumn(usize),

    #[error("empty support set")]
    EmptySupport,

    #[error("Metropolis-Hastings failure: {0}")]
    Sampler(String),

    #[error("ODE integration failed at parameters {params:?}: {reason}")]
    Integration { params: Vec<f64>, reason: String },

    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("relative error undefined: target has zero norm on the test set")]
    ZeroTargetNorm,

    #[error("iteration {iteration} (m = {samples}): {source}")]
    Iteration {
        iteration: usize,
        samples: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
