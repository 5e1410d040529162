use thiserror::Error;

use crate::market::TypeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid market: {0}")]
    InvalidMarket(String),
    #[error("invalid preference order: {0}")]
    InvalidOrder(String),
    #[error("unknown object type {0}")]
    UnknownType(TypeId),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} exceeds the enumeration budget of {limit} (got {actual})")]
    BudgetExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("ambiguous modified-mechanism pattern: {0}")]
    AmbiguousPattern(String),
}

impl Error {
    /// True for errors caused by a resource limit rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
