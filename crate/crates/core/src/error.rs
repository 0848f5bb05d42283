//! Crate-wide error type.

use crate::models::ModelKind;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Dataset construction and IO.
    #[error("row {row}: unknown player id {id}")]
    UnknownPlayerRow { row: usize, id: u32 },
    #[error("row {row}: player matched against itself")]
    SelfMatch { row: usize },
    #[error("{path}:{line}: {msg}")]
    MalformedLine {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("duplicate player label {0:?}")]
    DuplicateLabel(String),
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("fold count {k} is invalid for {outcomes} outcomes (need 2 <= k <= outcomes)")]
    InvalidFoldCount { k: usize, outcomes: u64 },

    // Models.
    #[error("unknown player id {0}")]
    UnknownPlayer(u32),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{kind} model requires dimension >= {min}, got {dim}")]
    InvalidDimension {
        kind: ModelKind,
        min: usize,
        dim: usize,
    },
    #[error("operation not supported for the {0} model")]
    UnsupportedKind(ModelKind),
    #[error("checkpoint {path}: {msg}")]
    BadCheckpoint { path: String, msg: String },
    #[error("checkpoint/dataset player mismatch: {0}")]
    PlayerMismatch(String),

    // Training and evaluation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite parameters at epoch {epoch}; learning rate {lr} is likely too large")]
    NonFiniteParameters { epoch: usize, lr: f64 },
    #[error("test set has no records")]
    EmptyTestSet,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    // Graphs and synthetic data.
    #[error("invalid dominance edge: {0}")]
    InvalidEdge(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
