use thiserror::Error;

/// Errors raised by the simulation primitives.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration is structurally valid but describes a system that
    /// cannot be simulated (e.g. a sampling budget of zero).
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was invoked with a mismatched mode or missing input.
    #[error("usage error: {0}")]
    Usage(String),
    /// Internal consistency violation between fields of a result.
    #[error("internal consistency error: {0}")]
    Internal(String),
    /// File export/import failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
