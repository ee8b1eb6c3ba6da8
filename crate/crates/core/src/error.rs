use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A line of a record stream or label file could not be decoded.
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    /// Frame index or timestamp did not strictly increase.
    #[error("line {line}: ordering error: {message}")]
    Ordering { line: usize, message: String },

    /// A value decoded fine but violates a domain invariant.
    #[error("{context}: validation error: {message}")]
    Validation { context: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("registration failed: no qualifying candidate face before {window_end_sec} s")]
    RegistrationFailed { window_end_sec: f64 },

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.into(),
        }
    }
}
