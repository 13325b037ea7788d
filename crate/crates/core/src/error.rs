use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),
    #[error("infeasible distribution: {0}")]
    InfeasibleDistribution(String),
    #[error("graph construction failed: {0}")]
    Construction(String),
    #[error("encoder build failed: {0}")]
    EncoderBuild(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grid mismatch between densities")]
    GridMismatch,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("alist format error at line {line}: {msg}")]
    Alist { line: usize, msg: String },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
