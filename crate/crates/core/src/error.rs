use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::source::SourceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Source(#[from] SourceError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corpus at {root} does not match the job: {reason}")]
    CorpusMismatch { root: PathBuf, reason: String },

    #[error("table {page_id}_{offset} already exists in the corpus")]
    DuplicateTable { page_id: u64, offset: u32 },

    #[error("checkpoint log {path} is unreadable at line {line}: {reason}; re-verify the corpus before resuming")]
    CheckpointCorrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("corpus at {0} has no manifest.json")]
    MissingManifest(PathBuf),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("job aborted: {0}")]
    Aborted(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

/// Attach a path or action description to an `io::Error`.
pub(crate) trait IoContext<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| Error::io(context(), e))
    }
}
