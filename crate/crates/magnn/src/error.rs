//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tuple: {0}")]
    InvalidTuple(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("budget exceeded: needed {needed} evaluations, budget is {budget}")]
    Budget { needed: u128, budget: u64 },
    #[error("invalid state: {0}")]
    State(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config parse: {0}")]
    ConfigParse(String),
    #[error("config validation failed:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
