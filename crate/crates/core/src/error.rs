use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dense materialization of a {n}x{n} matrix exceeds the threshold {threshold}")]
    TooLarge { n: usize, threshold: usize },

    #[error("invalid constraint set: {0}")]
    InvalidSet(String),

    #[error("point lies outside the constraint set (violation {0:e})")]
    OutsideSet(f64),

    #[error("operation not supported for this constraint set: {0}")]
    Unsupported(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("stepsize must be positive, got {0:e}")]
    InvalidStepsize(f64),

    #[error("not enough samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("chain is degenerate (zero variance)")]
    DegenerateChain,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
