use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("undefined Blumenthal-Getoor index: {0}")]
    UndefinedIndex(String),
    #[error("nested sampling budget {requested} exceeds cap {cap}")]
    Budget { requested: u64, cap: u64 },
    #[error("grid error: {0}")]
    Grid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn unsupported<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Unsupported(msg.into()))
}
