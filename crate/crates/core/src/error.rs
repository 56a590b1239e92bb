use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance of component {component} is not symmetric positive-definite")]
    NotPositiveDefinite { component: usize },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("unknown preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{0}: no points")]
    NoPoints(PathBuf),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no spatial information: I(i;x) is zero")]
    NoSpatialInformation,

    #[error("table has {entries} entries, more than the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
