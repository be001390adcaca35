use alloc::string::String;

/// Errors reported by the signal processing core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands disagree on shape.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// A configuration is internally inconsistent (e.g. a delay that the CP cannot absorb).
    #[error("configuration error: {0}")]
    Config(String),

    /// The LFSR feedback polynomial does not produce a maximal-length sequence.
    #[error("polynomial {poly:#x} is not primitive for degree {degree}: period {period}")]
    NotPrimitive { poly: u32, degree: u32, period: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(expected: impl Into<String>, actual: impl Into<String>) -> Error {
    Error::DimensionMismatch {
        expected: expected.into(),
        actual: actual.into(),
    }
}
