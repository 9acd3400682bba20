use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid market model: {0}")]
    InvalidModel(String),

    #[error("invalid constraint spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative quadratic form {0:e}: covariance is not positive semi-definite")]
    NotPsd(f64),

    #[error("Sharpe ratio undefined: zero volatility with positive excess return")]
    UndefinedRatio,

    #[error("B infeasible for this support")]
    InfeasibleSupport,

    #[error("portfolio wiped out: nonpositive gross portfolio return {0}")]
    WipedOut(f64),

    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty generation")]
    EmptyGeneration,

    #[error("backtest period {period}: {source}")]
    Period {
        period: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
