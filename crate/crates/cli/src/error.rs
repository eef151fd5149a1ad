use std::path::Path;

use thiserror::Error;

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nnwfn_core::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a snapshot file (missing NNWFN1 magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u8),
    #[error("snapshot payload is truncated")]
    Truncated,
    #[error("stale snapshot: dataset fingerprint {found} does not match recorded {expected}")]
    StaleSnapshot { expected: String, found: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}
