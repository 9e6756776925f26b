use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dilation scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("incompatible quasi-norm: {0}")]
    IncompatibleNorm(String),

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("the identity has no annulus index")]
    OriginPoint,

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("profile is not integrable near r = {0}")]
    NonIntegrableProfile(f64),

    #[error("weight q^{exponent} is not integrable near the identity")]
    NonIntegrableWeight { exponent: f64 },

    #[error("Riesz kernel is not in L^p'(Omega x Omega): 2sp = {two_sp} <= Q = {q_dim}")]
    NonIntegrableKernel { two_sp: f64, q_dim: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("weight vanishes identically")]
    ZeroWeight,

    #[error("weight must be nonnegative (found {0})")]
    NegativeWeight(f64),

    #[error("not a fixed point of the weighted operator: relative defect {0:e}")]
    NotAFixedPoint(f64),

    #[error("power iteration did not converge after {iterations} iterations (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    #[error("inadmissible parameters: {0}")]
    InadmissibleParams(String),

    #[error("member {id}: {source}")]
    Member { id: usize, source: Box<Error> },

    #[error("parse error at `{key}`: {reason}")]
    Parse { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn inadmissible(reason: impl Into<String>) -> Self {
        Error::InadmissibleParams(reason.into())
    }

    pub(crate) fn parse(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
