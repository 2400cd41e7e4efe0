use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("stage {stage} out of range 1..={max}")]
    StageOutOfRange { stage: usize, max: usize },
    #[error("historical window has no {0} days to sample from")]
    EmptyDayClass(&'static str),
    #[error("date ranges of the input files do not overlap")]
    EmptyIntersection,
    #[error("reference solver size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("LP numerical failure: {0}")]
    Numerical(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("solver timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("HTTP error: {0}")]
    Http(String),
    #[error("nonanticipativity violated: {0}")]
    Nonanticipativity(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
