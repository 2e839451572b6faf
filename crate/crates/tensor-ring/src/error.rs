//! Error type shared by all tensor-ring operations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode}: index {index} out of range 1..={dim}")]
    IndexOutOfRange { mode: usize, index: usize, dim: usize },

    #[error("mode {mode} invalid for an order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("{context}: expected shape {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid ring of cores: {0}")]
    RankChain(String),

    #[error("{context}: non-finite value encountered")]
    NonFinite { context: &'static str },

    #[error("relative error undefined for a zero-norm tensor")]
    ZeroNorm,

    #[error("leverage distribution undefined for a zero matrix")]
    ZeroMatrix,

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tensor file format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
