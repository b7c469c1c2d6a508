use std::fmt;
use std::path::Path;

use shadowfree_core::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or option values (exit 1).
    Usage(String),
    /// Unreadable, unwritable or malformed files (exit 2).
    Io(String),
    /// Inputs outside the model's domain, e.g. singular parameters (exit 3).
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Domain(_) => 3,
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn at(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Usage(m) => CliError::Usage(m),
            CliError::Io(m) => CliError::Io(format!("{p}: {m}")),
            CliError::Domain(m) => CliError::Domain(format!("{p}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Argument(_) => CliError::Usage(msg),
            Error::Io(_) | Error::Format { .. } | Error::Parse { .. } => CliError::Io(msg),
            Error::Domain(_) | Error::Singular(_) | Error::Degenerate(_) => CliError::Domain(msg),
        }
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
