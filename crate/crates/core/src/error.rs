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

    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("{doc_id}/{sent_id}: {message}")]
    InvalidSentence { doc_id: String, sent_id: String, message: String },

    #[error("line {line}: expected {expected} values, found {found}")]
    EmbeddingDim { line: usize, expected: usize, found: usize },

    #[error("split: {0}")]
    Split(String),

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy { kind: &'static str, name: String, available: String },

    #[error("training diverged at iteration {iteration} (lr {lr}): non-finite loss")]
    Diverged { iteration: usize, lr: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidSentence { .. }
                | Error::EmbeddingDim { .. }
                | Error::Split(_)
                | Error::Sampler(_)
                | Error::Config(_)
                | Error::UnknownStrategy { .. }
                | Error::Json(_)
        )
    }
}
