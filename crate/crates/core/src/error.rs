use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fact {index}: entity {entity} out of bounds (entity_count = {count})")]
    EntityOutOfBounds {
        index: usize,
        entity: u32,
        count: usize,
    },

    #[error("fact {index}: relation {relation} out of bounds (relation_count = {count})")]
    RelationOutOfBounds {
        index: usize,
        relation: u32,
        count: usize,
    },

    #[error("entity {0} out of bounds")]
    UnknownEntity(u32),

    #[error("relation {0} out of bounds")]
    UnknownRelation(u32),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ratio {0} outside [0, 1]")]
    InvalidRatio(f64),

    #[error("training diverged at epoch {epoch} (learning_rate = {learning_rate}): non-finite loss")]
    Diverged { epoch: usize, learning_rate: f64 },

    #[error("out-of-vocabulary id: {0}")]
    OutOfVocabulary(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing report cells: {0}")]
    MissingCells(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
