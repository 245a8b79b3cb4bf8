use std::fmt;
use std::process::ExitCode;

use emguard_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// One or more named checks failed.
    Check(Vec<String>),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Check(_) => ExitCode::from(1),
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(names) => write!(f, "failed checks: {}", names.join(", ")),
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Json(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}
