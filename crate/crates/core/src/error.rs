use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration (bad selector, bad grid, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// Exact oracle instance exceeds the enumeration limits.
    #[error("instance too large: {0}")]
    Size(String),

    /// Exponent fit could not be performed on the given series.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
