use thiserror::Error;

/// Errors raised by measure construction, transport solves and Sinkhorn runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("support of size {len} exceeds the exact solver cap of {cap} atoms; coarsen the grid")]
    Size { len: usize, cap: usize },

    #[error("infeasible support: {0}")]
    Support(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
