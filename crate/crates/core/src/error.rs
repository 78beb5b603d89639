use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid pyramid: {0}")]
    InvalidPyramid(String),

    #[error(
        "invalid depth: {levels} levels requested for a signal of length {length} (max {max})"
    )]
    InvalidDepth {
        levels: usize,
        length: usize,
        max: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter index {index} out of range ({count} trainable parameters)")]
    Index { index: usize, count: usize },

    #[error("optimizer state mismatch: {0}")]
    State(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
