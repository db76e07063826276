use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate token {0:?}")]
    DuplicateToken(String),

    #[error("{0} is empty")]
    Empty(String),

    #[error("models share no tokens")]
    EmptyIntersection,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("object {index} has a zero-norm vector; cosine distance is undefined")]
    ZeroNorm { index: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("index {index} out of range for {len} objects")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown object {0:?}")]
    UnknownObject(String),

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("cache format version {found} is not supported (expected {expected})")]
    CacheVersion { found: u32, expected: u32 },

    #[error("corrupt cache: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
