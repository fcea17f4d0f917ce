use thiserror::Error;

/// Errors raised by the numeric kernels, trainers and data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    Singular { pivot: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ingestion failed at line {line}: {reason}")]
    Ingestion { line: usize, reason: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("model integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
