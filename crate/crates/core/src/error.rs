use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {subdivisions} subdivisions (value {value:e}, error estimate {error:e})")]
    NonConvergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("finite-difference step underflow at x = {x}")]
    StepUnderflow { x: f64 },

    #[error("density is singular at x = {x}")]
    SingularPoint { x: f64 },

    #[error("grid too coarse: spectral tail fraction {tail_fraction:e} exceeds 1e-6")]
    GridTooCoarse { tail_fraction: f64 },

    #[error("degenerate time t = {t}")]
    DegenerateTime { t: f64 },

    #[error("covariance matrix is not positive definite even after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("circulant embedding failed: {0}")]
    EmbeddingFailure(String),

    #[error("series diverges for argument {argument} (terms stop decreasing at index {index})")]
    SeriesDivergence { argument: f64, index: usize },

    #[error("value overflows f64 (natural log {log_value})")]
    Overflow { log_value: f64 },

    #[error("error budget {budget:e} exceeds tolerance {tolerance:e}")]
    ToleranceBudgetExceeded { budget: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not available for this model: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
