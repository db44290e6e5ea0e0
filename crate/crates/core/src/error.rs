use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::data::RowError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what}: requested {requested} exceeds limit {limit}")]
    Resource {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{} malformed row(s) in {}", .errors.len(), .path.display())]
    Ingest {
        path: PathBuf,
        errors: Vec<RowError>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
