use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed JSON at line {line}: {message}")]
    MalformedJson {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid {field}: {reason}")]
    InvariantViolation { field: String, reason: String },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated data: {0}")]
    TruncatedData(String),

    #[error("scene {0} has no fixation map")]
    MissingFixationMap(String),

    #[error("scene {0} is degenerate: proposal has fixations but scene total is zero")]
    DegenerateScene(String),

    #[error("window of size {window} does not fit {n} proposals")]
    InvalidWindow { n: usize, window: usize },

    #[error("proposal {id} appears in {appearances} windows, expected {expected}")]
    CoverageViolation {
        id: u32,
        appearances: usize,
        expected: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("scene mismatch: {0}")]
    SceneMismatch(String),

    #[error("could not generate scene {index} after {attempts} attempts")]
    GenerationFailure { index: usize, attempts: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvariantViolation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
