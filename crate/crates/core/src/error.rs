use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed data whose shape does not match the receiving object.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    /// Optimizer received a NaN/Inf gradient; parameters were left untouched.
    #[error("training diverged: non-finite gradient in {0}")]
    Divergence(&'static str),

    #[error("dynamics model diverged: non-finite prediction")]
    ModelDivergence,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
