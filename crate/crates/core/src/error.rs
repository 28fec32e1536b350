use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tap index {index} out of range for filter length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate tap index {0}")]
    DuplicateIndex(usize),
    #[error("filter length must be at least 1")]
    EmptySystem,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("length mismatch: {what} has {got} samples, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("configured algorithm is {configured}, step requires {required}")]
    AlgorithmMismatch {
        configured: &'static str,
        required: &'static str,
    },
    #[error("gain element {index} is not strictly positive")]
    NonPositiveGain { index: usize },
    #[error("step size mu = {0} lies outside the stability bound 0 < mu < 2")]
    OutsideStabilityBound(f64),
    #[error("{0}")]
    Degenerate(&'static str),
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error("requested series is not available at the recorded stride: {0}")]
    StrideTooCoarse(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
