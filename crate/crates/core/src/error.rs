use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments it cannot accept
    /// (dimension mismatch, empty input).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numeric quantity came out non-finite.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Objective evaluation failed inside the generational loop.
    #[error("evaluation failed at generation {generation}, individual {index}: {detail}")]
    Generation {
        generation: usize,
        index: usize,
        detail: String,
    },

    /// One realization of an ensemble failed.
    #[error("run {run} (base seed {base_seed}) failed: {source}")]
    Run {
        run: u64,
        base_seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema violation: {0}")]
    Schema(String),

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
