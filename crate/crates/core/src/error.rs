use thiserror::Error;

use crate::model::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("expected an optimal solution, got {0:?}")]
    NotOptimal(SolveStatus),

    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),

    /// An input artifact does not satisfy the precondition of a stage.
    #[error("{0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Mps { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("too many unsolvable instances: {skipped} of {sampled} sampled")]
    Unsolvable { skipped: usize, sampled: usize },

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by malformed user input rather than a failing computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstance(_)
                | Error::InvalidFamily(_)
                | Error::InvalidStrategy(_)
                | Error::Precondition(_)
                | Error::InvalidArgument(_)
                | Error::Mps { .. }
                | Error::Config(_)
                | Error::FormatVersion { .. }
                | Error::Json(_)
        )
    }
}
