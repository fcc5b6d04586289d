use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Whether an error stems from bad input/configuration or from a failure
/// while doing the work. The CLI maps these onto distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid repository name {0:?}")]
    InvalidName(String),

    #[error("invalid commit hash {0:?}")]
    InvalidHash(String),

    #[error("unknown project id {0}")]
    UnknownId(u32),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{path}:{line}: input not sorted by commit ({current} follows {previous})")]
    SortViolation {
        path: String,
        line: u64,
        previous: String,
        current: String,
    },

    #[error("project id {id} out of range for universe of {universe}")]
    OutOfBounds { id: u32, universe: usize },

    #[error("cannot merge clusterings over different universes ({expected} vs {found})")]
    UniverseMismatch { expected: usize, found: usize },

    #[error("modularity is undefined for a graph without edges")]
    EmptyGraph,

    #[error("cluster has no members")]
    EmptyCluster,

    #[error("{0}")]
    Eval(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Validation,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }
}
