use thiserror::Error;

/// Errors raised by the allocation, estimation, fitting and simulation APIs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid solver profile: {0}")]
    InvalidProfile(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("duplicate solver id `{0}`")]
    DuplicateId(String),

    #[error(
        "cost {cost} is not a multiple of granularity {granularity} (relative error {rel_error:e})"
    )]
    Quantization {
        cost: f64,
        granularity: f64,
        rel_error: f64,
    },

    #[error("budget grid of {units} units exceeds the cap of {cap}; use a coarser granularity")]
    GridTooLarge { units: u64, cap: u64 },

    #[error("power-law fit needs at least 3 distinct query counts, got {0}")]
    TooFewPoints(usize),

    #[error("best-fit exponent sits at the upper search bound {0}")]
    GammaAtUpperBound(f64),

    #[error("best-fit exponent does not exceed 1 (converged to {0})")]
    GammaNotAboveOne(f64),

    #[error("oracle failed at trial {trial}: {message}")]
    Oracle { trial: u64, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
