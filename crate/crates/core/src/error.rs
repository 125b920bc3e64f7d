use thiserror::Error;

/// Errors raised by the engine. Every variant is a validation or capacity
/// signal; none of them indicate a bug.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distortion function: {0}")]
    InvalidDistortion(String),

    #[error("invalid capacity: {0}")]
    InvalidCapacity(String),

    #[error("scenario count mismatch: expected {expected}, got {got}")]
    ScenarioMismatch { expected: usize, got: usize },

    /// Exact convolution would exceed the configured term budget; fall back
    /// to Monte Carlo.
    #[error("exact pooling needs {needed} composite terms, limit is {limit}; use Monte Carlo mode")]
    ExplosionLimit { needed: usize, limit: usize },

    #[error("invalid ladder: {0}")]
    InvalidLadder(String),

    #[error("unknown ladder `{0}`")]
    UnknownLadder(String),

    #[error("unsupported in exact mode: {0}")]
    NotDiscrete(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("root bracketing failed: {0}")]
    NoBracket(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
