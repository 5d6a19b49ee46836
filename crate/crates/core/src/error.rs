use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("row {row} is not unit-normalized (norm {norm})")]
    Unnormalized { row: usize, norm: f64 },

    #[error("item {0} has an all-zero embedding row")]
    DeadRow(usize),

    #[error("restart policy requires the initial parameter snapshot")]
    MissingInitSnapshot,

    #[error("descriptor provider failed for groups {groups:?}: {message}")]
    Provider { groups: Vec<usize>, message: String },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("scoring failed for user {user}: {source}")]
    Scoring {
        user: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
