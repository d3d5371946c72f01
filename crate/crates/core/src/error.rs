use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A moment of higher order than the model carries was requested.
    #[error("moment of order {requested} requested but the model only carries moments up to {available}")]
    OutOfRange { requested: usize, available: usize },

    /// A computation would exceed the configured enumeration or memory budget.
    #[error("resource limit: {what} requires {required} but the budget is {budget}")]
    ResourceLimit {
        what: String,
        required: u128,
        budget: u128,
    },

    /// Two independent computations disagreed. Always a bug.
    #[error("integrity error: {0}")]
    Integrity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
