use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate entry for user `{user}` and item `{item}`")]
    DuplicatePair {
        line: usize,
        user: String,
        item: String,
    },

    #[error("line {line}: run mixes system names `{expected}` and `{found}`")]
    MixedSystems {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("input contains no records")]
    EmptyInput,

    #[error("category `{0}` has no items")]
    EmptyCategory(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("no score for system `{system}` in category `{category}`")]
    MissingCell { category: String, system: String },

    #[error("orderings cover different systems")]
    DisjointSystems,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// True for errors caused by bad input or usage rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        if let Error::InFile { source, .. } = self {
            return source.is_input_error();
        }
        !matches!(
            self,
            Error::EmptyCategory(_) | Error::MissingCell { .. } | Error::DisjointSystems
        )
    }
}
