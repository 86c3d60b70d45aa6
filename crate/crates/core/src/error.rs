use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the codec, the container and the I/O helpers.
#[derive(Debug, Error)]
pub enum PismError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("expected a frame of {expected} samples, got {actual}")]
    FrameLength { expected: usize, actual: usize },

    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("object count mismatch: expected {expected}, got {actual}")]
    ObjectCount { expected: usize, actual: usize },

    #[error("negative power value {0}")]
    NegativePower(f64),

    #[error("invalid band partition: {0}")]
    InvalidBands(String),

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("truncated stream at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: u64, needed: usize },

    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    #[error("input error in {path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, PismError>;
