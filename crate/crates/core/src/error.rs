use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator is not strictly convex: {0}")]
    NotStrictlyConvex(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Unparseable generator spec or command configuration. `token` is the
    /// offending piece of text.
    #[error("configuration error at `{token}`: {message}")]
    Config { token: String, message: String },

    #[error("{source_name}:{line}: `{token}`: {message}")]
    Ingest {
        source_name: String,
        line: usize,
        token: String,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration too large: {count} configurations exceed limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("corrupt null table cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(token: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            token: token.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
