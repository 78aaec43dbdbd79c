use std::io;

use thiserror::Error;

/// Errors shared by every stage of the induction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A line in an input file did not match the expected format.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An argument or precondition was violated.
    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
