use std::path::PathBuf;

use thiserror::Error;

use crate::dump::Role;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("malformed dump {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("dump role mismatch: expected `{expected}`, found `{found}`")]
    RoleMismatch { expected: Role, found: Role },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("patch grid does not tile the image: {0}")]
    PatchGrid(String),
    #[error("degenerate null distribution (bootstrap standard deviation is zero)")]
    DegenerateNull,
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by degenerate statistics rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateNull | Error::Degenerate(_))
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub(crate) fn ensure_same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} vs {b} elements")));
    }
    Ok(())
}
