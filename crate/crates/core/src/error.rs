use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// A pixel is not covered by any patch of the requested grid.
    #[error("pixel (row {row}, col {col}) is not covered by any patch")]
    Coverage { row: usize, col: usize },

    #[error("unsupported capability: {0}")]
    Unsupported(String),

    /// A solver iterate became non-finite.
    #[error("solver diverged at iteration {iteration}: {what} is not finite")]
    Divergence {
        iteration: usize,
        what: &'static str,
    },

    #[error("dense oracle size guard exceeded: {entries} entries (limit {limit})")]
    SizeGuard { entries: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} of length {expected}"),
            actual: format!("length {actual}"),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "{what} has a non-finite entry at index {i}"
        ))),
        None => Ok(()),
    }
}
