//! Error type shared by all modules of the crate.

/// Crate-wide error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An internal numeric contract was broken (non-Hermitian input where a
    /// Hermitian matrix is required, non-projector observable, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Pulse-sequence text could not be parsed. Columns are 1-based byte
    /// offsets of the offending token within the line.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// An iterative numeric routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
