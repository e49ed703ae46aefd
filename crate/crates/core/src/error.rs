use thiserror::Error;

use crate::{constitution::ConstitutionError, evalbench::BenchError, filter::FilterError, geo_map::MapError, ingest::IngestError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error; wraps the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Constitution(#[from] ConstitutionError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by inputs or configuration rather than by a
    /// broken internal invariant.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
