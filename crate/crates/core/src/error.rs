use thiserror::Error;

/// Errors raised by the arena library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    /// A scenario field failed validation. `field` names the offending key.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An argument fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// An adversarial construction cannot be realized for these parameters.
    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("slot {slot} out of range 1..={slot_count}")]
    SlotOutOfRange { slot: usize, slot_count: usize },

    #[error("operation requires the {expected} mechanism, trace was produced by {actual}")]
    WrongMechanism {
        expected: &'static str,
        actual: &'static str,
    },

    /// A type invariant broke mid-simulation.
    #[error("invariant violated at slot {slot}: {reason}")]
    Invariant { slot: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl ArenaError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ArenaError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for ArenaError {
    fn from(err: std::io::Error) -> Self {
        ArenaError::Io(err.to_string())
    }
}

impl From<csv::Error> for ArenaError {
    fn from(err: csv::Error) -> Self {
        ArenaError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ArenaError>;
