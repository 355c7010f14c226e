use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Operands disagree in dimension, shape, scalar mode or group.
    #[error("mismatch: {0}")]
    Mismatch(String),
    /// Text or JSON input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// A scenario file is well-formed JSON but not a valid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Mismatch(_) => "mismatch",
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}

macro_rules! mismatch {
    ($($arg:tt)*) => { $crate::error::Error::Mismatch(format!($($arg)*)) };
}

pub(crate) use domain;
pub(crate) use mismatch;
