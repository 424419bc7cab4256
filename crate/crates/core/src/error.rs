use std::path::PathBuf;

use thiserror::Error;

use crate::io::ingest::IngestError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category; the CLI maps each one to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Problems with the observed data (files, series shape, zero series).
    Ingestion,
    /// Invalid parameters supplied by the caller.
    Config,
    /// The data are valid but a statistic cannot be evaluated.
    Numeric,
    /// Reading or writing files failed.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no admissible interval: {0}")]
    NoAdmissibleInterval(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("all-zero series: overdispersion undefined (series `{id}`)")]
    AllZeroSeries { id: String },

    #[error("series `{id}` is too short for overdispersion estimation (length {len}, need >= 2)")]
    SeriesTooShort { id: String, len: usize },

    #[error("invalid series `{id}`: {reason}")]
    InvalidSeries { id: String, reason: String },

    #[error("series length mismatch: `{id}` has {found} observations, expected {expected}")]
    LengthMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("need at least {need} series, got {got}")]
    TooFewSeries { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error("quantile cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::AllZeroSeries { .. }
            | Error::SeriesTooShort { .. }
            | Error::InvalidSeries { .. }
            | Error::LengthMismatch { .. }
            | Error::TooFewSeries { .. }
            | Error::Ingest(_) => ErrorKind::Ingestion,
            Error::NoAdmissibleInterval(_) | Error::Domain(_) | Error::Config(_) => {
                ErrorKind::Config
            }
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Cache { .. } | Error::Io { .. } | Error::Json(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
