use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bessel_k1 domain error: x = {0} (must be > 0)")]
    Domain(f64),

    #[error("coincident skyrmions {i} and {j} (separation {separation:e})")]
    Singular { i: usize, j: usize, separation: f64 },

    #[error("unstable step at iteration {iteration}: particle {particle} moved {displacement} (> box_l/4)")]
    Unstable {
        iteration: u64,
        particle: usize,
        displacement: f64,
    },

    #[error("placement failed: {0}")]
    Placement(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("sweep failed for cells {0:?}")]
    Sweep(Vec<(usize, usize)>),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("interrupted")]
    Interrupted,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
