use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("henon map diverged at step {step} (|x| = {value:e})")]
    Diverged { step: usize, value: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("fixed-point overflow in {0}")]
    Overflow(&'static str),

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("degenerate encoding range: min = max = {0}")]
    DegenerateRange(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("zero normalizer for nrmse")]
    ZeroNormalizer,

    #[error("no internal edges left to remove")]
    NoInternalEdges,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
