use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("invalid group element: {0}")]
    InvalidElement(String),
    #[error("dimension or ring mismatch: {0}")]
    Mismatch(String),
    #[error("integer overflow during {0}")]
    Overflow(&'static str),
    #[error("ball exceeds element cap of {cap}")]
    CapExceeded { cap: usize },
    #[error("element missing from product ball: {0}")]
    MissingElement(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("non-symmetric generating set: {0}")]
    NonSymmetric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("certification refused: {0}")]
    Refused(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
