use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("labeling error: entity `{entity}` does not occur in sentence `{sentence}`")]
    Labeling { sentence: String, entity: String },

    #[error("label conflict at cell ({row}, {col}): existing {existing}, requested {requested}")]
    Conflict {
        row: usize,
        col: usize,
        existing: i8,
        requested: i8,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("span {start}..={end} out of bounds for a {size}-token sentence")]
    Bounds {
        start: usize,
        end: usize,
        size: usize,
    },

    #[error("sequence of {len} tokens exceeds encoder limit of {limit}")]
    Length { len: usize, limit: usize },

    #[error("model state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("client error: {0}")]
    Client(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
