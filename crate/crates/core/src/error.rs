use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{stream}:{line}: {message}")]
    Parse {
        stream: String,
        line: usize,
        message: String,
    },

    #[error("duplicate id `{id}` in {stream}")]
    DuplicateId { stream: String, id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("unknown reader `{0}`")]
    UnknownReader(String),

    #[error("unknown paper `{0}`")]
    UnknownPaper(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("invalid meta-path: {0}")]
    InvalidMetaPath(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("feature mismatch: model expects {expected:?}, got {actual:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },

    #[error("untrainable: {0}")]
    Untrainable(String),

    #[error("no model for community {0}")]
    NoModel(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
