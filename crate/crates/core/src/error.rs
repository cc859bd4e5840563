use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: malformed JSON: {detail}")]
    MalformedJson { line: usize, detail: String },

    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },

    #[error("line {line}: missing field `{field}`")]
    MissingField { field: String, line: usize },

    #[error("line {line}: field `{field}` must be a string")]
    FieldType { field: String, line: usize },

    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { id: String, line: usize },

    #[error("line {line}: empty id")]
    EmptyId { line: usize },

    #[error("{id}: score out of range ({value})")]
    ScoreOutOfRange { id: String, value: f64 },

    #[error("{id}: no sidecar score")]
    MissingScore { id: String },

    #[error("invalid field mapping: {0}")]
    Mapping(String),

    #[error("no focal declaration")]
    NoFocalDeclaration,

    #[error("node belongs to a different syntax tree")]
    ForeignNode,

    #[error("{id}: coverage scorer failed: {reason}")]
    Scorer { id: String, reason: String },

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
