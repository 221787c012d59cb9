use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] argus_core::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("unknown timezone `{0}`")]
    Timezone(String),
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("precondition failed for {scenario}: {missing}")]
    Precondition { scenario: String, missing: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
