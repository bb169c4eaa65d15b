use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient raters: need at least 3 votes, got {0}")]
    InsufficientRaters(usize),

    #[error("degenerate chance agreement: every rating falls in one category but agreement is not perfect")]
    DegenerateChanceAgreement,

    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),

    #[error("class {class} has {count} members, fewer than the {k} folds requested")]
    ClassTooSmall { class: usize, count: usize, k: usize },

    #[error("class {0} is absent from the training data")]
    MissingClass(usize),

    #[error("dimension mismatch: {what} expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("model file format error: {0}")]
    ModelFormat(String),

    #[error("provider error: {0}")]
    Provider(#[from] crate::ingestion::ProviderError),

    #[error("image decode error: {0}")]
    Image(String),

    #[error("unknown baseline `{0}`")]
    UnknownBaseline(String),

    #[error("configuration error for key `{key}`: {message}")]
    Config { key: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}
