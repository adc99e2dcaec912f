use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("size guard: {what} has {size} elements, limit is {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("condition has zero probability: {0}")]
    ZeroProbability(String),
    #[error("rejection budget exhausted after {attempts} attempts: {context}")]
    BudgetExhausted { attempts: u64, context: String },
    #[error("walk step cap {cap} reached")]
    StepCap { cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
