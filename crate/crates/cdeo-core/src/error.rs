//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, CdeoError>;

#[derive(Debug, Error)]
pub enum CdeoError {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature did not converge to the requested tolerance.
    #[error("quadrature failed to converge: {0}")]
    Divergence(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("solver did not converge: {0}")]
    Solver(String),

    /// Grid or configuration data is structurally unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Serialization / deserialization of an artifact failed.
    #[error("format error: {0}")]
    Format(String),
}

impl CdeoError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CdeoError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CdeoError::Config(msg.into())
    }
}
