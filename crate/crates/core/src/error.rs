use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("fit window: {0}")]
    FitWindow(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
