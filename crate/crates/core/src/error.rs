use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("degenerate descent direction: second form is {value:.3e}")]
    DegenerateDirection { value: f64 },

    #[error("objective became non-finite at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("cannot add relative noise to zero data")]
    ZeroData,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image is not square: {len} pixels")]
    NotSquareImage { len: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
