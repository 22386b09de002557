use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate {index} in point")]
    NonFinitePoint { index: usize },

    #[error("non-finite value encountered at coordinate {coordinate}")]
    NonFiniteValue { coordinate: usize },

    #[error("objective returned a non-finite value")]
    NonFiniteEvaluation,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("unsupported combination: {0}")]
    Unsupported(&'static str),

    #[error("gradient is zero; the divergence threshold is undefined")]
    ZeroGradient,

    #[error("trajectory {index} has {len} records, need at least {needed}")]
    TrajectoryTooShort {
        index: usize,
        len: usize,
        needed: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
