use thiserror::Error;

/// Rejection of a parameter container or config document.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} must be a non-negative variance (sigma2 strictly positive), got {value}")]
    NegativeVariance { field: &'static str, value: f64 },
    #[error("{field} must be a finite non-negative power, got {value}")]
    PowerOutOfRange { field: &'static str, value: f64 },
    #[error("{field} must lie in [0, 1], got {value}")]
    SplitOutOfRange { field: &'static str, value: f64 },
    #[error("blocklength {n} is too small, this scheme needs n >= {min}")]
    BlocklengthTooSmall { n: u64, min: u64 },
    #[error("{field} must be finite and non-negative, got {value}")]
    InvalidRate { field: &'static str, value: f64 },
    #[error("n*rate = {bits} bits exceeds the {max} bits a double-precision message point can resolve")]
    MessageSetTooLarge { bits: f64, max: f64 },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`rate` and `rate_fraction` are mutually exclusive")]
    ConflictingRate,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("config document: {0}")]
    Parse(String),
}

/// Failures inside the coding schemes themselves.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("message {w} outside 1..={m}")]
    MessageOutOfRange { w: u64, m: u64 },
    #[error("message power is zero, the feedback recursion is undefined")]
    DegenerateSplit,
    #[error("expected a sequence of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("encoder expected time {expected}, was asked for {got}")]
    OutOfOrderStep { expected: usize, got: usize },
    #[error("user index {0} is not 1 or 2")]
    UnknownUser(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("grid `{0}` must be ascending values in [0, 1]")]
    InvalidGrid(&'static str),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
