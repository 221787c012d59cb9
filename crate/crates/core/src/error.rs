use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{device}` expects a {expected} state")]
    KindMismatch { device: String, expected: &'static str },
    #[error("trace spans {spanned} day(s), fewer than the {requested} requested")]
    NotEnoughDays { spanned: i64, requested: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("no training windows")]
    NoWindows,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("empty score set")]
    EmptyScores,
    #[error("event out of order at index {index}")]
    OutOfOrder { index: usize },
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error("label count {labels} does not match {events} events")]
    LabelMismatch { labels: usize, events: usize },
    #[error("trace carries no labels")]
    Unlabeled,
}
