use thiserror::Error;

/// Errors shared by every module of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A constrained computation has an empty feasible set.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A simulation configuration exceeds a hard resource bound.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}
