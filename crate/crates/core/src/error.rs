use thiserror::Error;

use crate::arith::ArithError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("instance has no agents")]
    EmptyInstance,
    #[error("instance has no goods")]
    NoGoods,
    #[error("agent {agent} has a nonpositive valuation")]
    NonpositiveValuation { agent: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("agent index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("prioritized allocation over an empty agent sequence")]
    EmptyAgentSequence,
    #[error("({t}, {k}) is not a valid split index")]
    NotInT { t: usize, k: u64 },
    #[error("reallocation precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("enumeration needs {needed} allocations, budget is {budget}")]
    BudgetExceeded { needed: String, budget: u64 },
    #[error("valuations too large for the brute-force oracle")]
    OracleOverflow,
    #[error("internal invariant failure: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure_invariant {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Invariant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure_invariant;
