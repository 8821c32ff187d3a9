use std::fmt;
use std::path::Path;

use serde_json::json;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad arguments or unusable input data.
    Input,
    /// Reading or writing files failed.
    Io,
    /// The statistics are undefined for this input (e.g. a constant null).
    Degenerate,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Input => 2,
            Kind::Io => 3,
            Kind::Degenerate => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Input => "input",
            Kind::Io => "io",
            Kind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Input,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Io,
            message: message.into(),
        }
    }

    /// The machine-readable record printed on stderr.
    pub fn record(&self) -> serde_json::Value {
        json!({
            "error": self.kind.name(),
            "exit_code": self.kind.code(),
            "message": self.message,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl From<attnboot::Error> for CliError {
    fn from(e: attnboot::Error) -> Self {
        let kind = if e.is_io() {
            Kind::Io
        } else if e.is_degenerate() {
            Kind::Degenerate
        } else {
            Kind::Input
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(e.to_string())
    }
}

/// Missing inputs are usage errors, not I/O failures.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} does not exist", path.display())))
    }
}

pub fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} is not a directory", path.display())))
    }
}
