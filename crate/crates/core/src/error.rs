use std::path::PathBuf;

use crate::catalog::ItemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate item id {0}")]
    DuplicateItem(ItemId),

    #[error("unknown item id {0}")]
    UnknownItem(ItemId),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("surrogate design matrix is singular even after ridge escalation")]
    DegenerateDesign,

    #[error("feedback is not accepted in a non-feedback session")]
    GroupPolicy,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("replay diverged: {0}")]
    Replay(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
