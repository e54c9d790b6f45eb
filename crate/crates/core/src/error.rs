//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate plane fit: normal equations are singular")]
    DegenerateFit,

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument {
        name: &'static str,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parsable category tag, used by the CLI's one-line
    /// error output and the FFI status codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::DegenerateFit => "degenerate_fit",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::Config { .. } => "config",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub fn config(field: &str, message: impl Into<String>) -> Error {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
