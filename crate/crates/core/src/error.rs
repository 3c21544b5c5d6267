use std::path::PathBuf;

use crate::trainer::TrainHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Load { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    Lookup { id: u32, vocab_size: usize },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("enumeration of {outcomes} outcomes exceeds budget of {budget}")]
    Size { outcomes: f64, budget: u64 },

    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("training diverged at step {step} (non-finite loss)")]
    Diverged { step: usize, history: Box<TrainHistory> },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
