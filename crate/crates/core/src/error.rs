use thiserror::Error;

/// Errors raised by the numerical kernels and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is numerically singular or not positive definite")]
    Singular,

    #[error("no sign change on bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("pole of the multiplier equation at mu = {0}")]
    Pole(f64),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("degenerate channel for user {0}")]
    DegenerateChannel(usize),

    #[error("SINR constraint set is empty for user {0}")]
    Infeasible(usize),

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
