use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arity mismatch: tensor of rank {rank} evaluated on {got} arguments")]
    ArityMismatch { rank: usize, got: usize },

    #[error("basis is not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("matrix is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid tensor specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("polytope format: {0}")]
    Format(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("degenerate chart point: {0}")]
    DegenerateChart(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
