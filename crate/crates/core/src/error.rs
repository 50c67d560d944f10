use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trace `{0}` has no read requests")]
    NoReads(String),

    #[error("request of {size} blocks does not fit in a cache of {capacity} blocks")]
    RequestTooLarge { size: u64, capacity: u64 },

    #[error("no accesses: hit ratio is undefined")]
    NoAccesses,

    #[error("baseline downloaded nothing: storage activity ratio is undefined")]
    NoBaselineDownloads,

    #[error("cache budget is below one block ({bytes} bytes available, block size {block_size})")]
    CacheTooSmall { bytes: u64, block_size: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace `{trace}`: {source}")]
    Trace {
        trace: String,
        #[source]
        source: Box<Error>,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_trace(self, trace: &str) -> Self {
        Error::Trace {
            trace: trace.to_owned(),
            source: Box::new(self),
        }
    }
}
