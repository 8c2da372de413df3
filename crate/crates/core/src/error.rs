use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("evaluation error at column {column}: {message}")]
    Eval { column: usize, message: String },

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("node budget exceeded: {requested} nodes requested, cap is {cap}")]
    Budget { requested: u64, cap: u64 },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("linear solver error: {message} (condition estimate {condition:.3e})")]
    Solver { message: String, condition: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
