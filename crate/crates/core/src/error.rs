use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural invariant of a constellation, quantizer or channel is violated.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Parameters fall outside the regime where a formula applies.
    #[error("parameter regime: {0}")]
    Regime(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// A computed probability escaped [0, 1] by more than the rounding slack.
    #[error("probability {value} outside [0, 1]")]
    ProbabilityRange { value: f64 },

    /// Adaptive quadrature did not reach its tolerance.
    #[error("quadrature did not converge: estimate {value}, error {abs_error}")]
    Quadrature { value: f64, abs_error: f64 },

    #[error("insufficient points for fit: need {needed}, have {have}")]
    InsufficientPoints { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
