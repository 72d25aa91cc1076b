use thiserror::Error;

/// Errors raised by table construction, simulation and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    /// An input violated a documented constraint.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The geometry produced an impossible state, e.g. a ray that never
    /// meets the boundary of a closed table.
    #[error("internal consistency error: {0}")]
    Internal(String),

    /// A numerical procedure could not produce a meaningful result.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl BilliardError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Self::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, BilliardError>;
