use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or an inconsistent combination of options.
    #[error("usage error: {0}")]
    Usage(String),

    /// The exponential tilt has no solution for the requested target mean.
    #[error("degenerate tilt: {0}")]
    DegenerateTilt(String),

    /// An optional iteration or horizon cap was exceeded.
    #[error("timeout after {0} steps")]
    Timeout(u64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
