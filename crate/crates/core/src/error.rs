use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A stated precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("search space too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn pre<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
