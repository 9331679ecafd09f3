use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate certificate id {0:?}")]
    DuplicateId(String),

    #[error("certificate {id:?}: {message}")]
    Priority { id: String, message: String },

    #[error("unknown class id {0:?}")]
    UnmappedClass(String),

    #[error("invalid label catalog: {0}")]
    Catalog(String),

    #[error("{0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-dimensional vocabulary")]
    EmptyVocabulary,

    #[error("embedding not found for key {0:?}")]
    EmbeddingNotFound(String),

    #[error("unknown tokenizer scheme {0:?}")]
    UnknownScheme(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl ToString) -> Self {
        Error::Parse {
            line,
            message: message.to_string(),
        }
    }
}
