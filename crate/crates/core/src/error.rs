use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node}: probabilities sum to {sum}")]
    ProbabilitySum { node: usize, sum: f64 },
    #[error("node {node}: transition probability {prob} is not positive")]
    NonPositiveProbability { node: usize, prob: f64 },
    #[error("horizon mismatch: expected {expected}, found {found}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("level must lie in (0,1), got {0}")]
    InvalidLevel(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("density step at node {node} is not a valid likelihood ratio: {reason}")]
    InvalidDensity { node: usize, reason: String },
    #[error("parameter {0:?} lies outside the admissible domain")]
    OutsideDomain(Vec<f64>),
    #[error("selection uses information not available at time {time}")]
    FutureInformation { time: usize },
    #[error("not a stopping time: decision at time {time} depends on later information")]
    NotStoppingTime { time: usize },
    #[error("covariance is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },
    #[error("enumeration size {count} exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("conditional layer unavailable at time {0}")]
    ConditionalLayerUnavailable(usize),
    #[error("boundary grid: {dropped} of {total} points dropped as inadmissible")]
    TooManyDropped { dropped: usize, total: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("{0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
