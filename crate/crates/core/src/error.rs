use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum RexError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error in {path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no parseable RAVDESS speech files found under {0}")]
    EmptyCorpus(PathBuf),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("clip is unvoiced: no frame exceeds the silence threshold")]
    Unvoiced,

    #[error("no counterfactual sample for clip {clip_id} with contrast emotion {emotion}")]
    NoCounterfactual { clip_id: String, emotion: String },

    #[error("self-contrast requested: contrast emotion equals {0}")]
    SelfContrast(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("gradient check failed: max relative error {max_error:.3e} exceeds {tolerance:.1e} at {offending:?}")]
    GradCheck {
        max_error: f64,
        tolerance: f64,
        offending: Vec<(usize, usize)>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unknown clip {clip_id}; valid ids: {valid}")]
    UnknownClip { clip_id: String, valid: String },
}

pub type Result<T> = std::result::Result<T, RexError>;

impl RexError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RexError::Io {
            path: path.into(),
            source,
        }
    }
}
