use thiserror::Error;

use crate::types::EvaluationRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an operation's precondition (wrong step index, counter
    /// out of range, advancing past the final configuration, ...).
    #[error("contract error: {0}")]
    Contract(String),

    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    /// The objective returned NaN or an infinity. The record that triggered
    /// the abort is kept for diagnostics.
    #[error("non-finite evaluation at t={}: f({:?}) = {}", .record.t, .record.point, .record.value)]
    NonFinite { record: Box<EvaluationRecord> },

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
