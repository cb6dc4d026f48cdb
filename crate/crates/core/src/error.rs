use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),

    #[error("coordinate ({i}, {j}) out of bounds for a {size}x{size} grid")]
    OutOfBounds { i: i64, j: i64, size: usize },

    #[error("position ({0}, {1}) is not a deployable outdoor pixel")]
    NotDeployable(usize, usize),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("no valid pixels in map")]
    NoValidPixels,

    #[error("empty mask")]
    EmptyMask,

    #[error("illegal action {0}: candidate is masked")]
    IllegalAction(usize),

    #[error("no legal action left")]
    NoLegalAction,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(
        "brute force refused: {count} candidates exceed limit {limit}; use stride >= {stride_hint}"
    )]
    CandidateLimit {
        count: usize,
        limit: usize,
        stride_hint: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
