//! Error type shared across the crate.

use thiserror::Error;

/// Failures surfaced by dataset ingestion, generation, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("input contains no interactions")]
    EmptyInput,

    #[error("line {line}: malformed record `{content}`")]
    MalformedLine { line: usize, content: String },

    #[error("line {line}: rating `{value}` outside 1..=10")]
    RatingOutOfRange { line: usize, value: String },

    #[error("duplicate pair (user `{user}`, item `{item}`)")]
    DuplicatePair { user: String, item: String },

    #[error("identifier `{0}` contains a separator character")]
    InvalidIdentifier(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible generator parameters: {0}")]
    InfeasibleParameters(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
