use thiserror::Error;

/// Errors raised by codebook construction, measurement synthesis, detection
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined for this input: {0}")]
    UndefinedInput(String),

    /// A construction produced a structure that does not satisfy its own
    /// asserted shape (for example a Kerdock orbit of the wrong size).
    #[error("structural assertion failed: {0}")]
    StructuralAssertion(String),

    /// The columns selected so far do not span a well-conditioned subspace.
    #[error("selected columns are numerically rank deficient at column {column} (sigma_min/sigma_max = {ratio:e})")]
    NumericalDegeneracy { column: usize, ratio: f64 },

    #[error("experiment config rejected at {point}: {reason}")]
    ConfigRejected { point: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
