use std::io;

/// Errors produced by the decomposition library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A text or binary input did not follow its format.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    /// A value lies outside the physically meaningful domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters make the invariant system singular (some `K_H` equals 1).
    #[error("singular parameters: {0}")]
    Singular(String),

    /// Inputs carry no information (all-zero spectra, zero-length vectors).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A caller-supplied argument is invalid (empty range, size mismatch, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
