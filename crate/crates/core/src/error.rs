use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("case precondition failed: {0}")]
    Case(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("term count exploded past {limit} terms")]
    TermExplosion { limit: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
