use thiserror::Error;

use crate::point::Point;
use crate::prox_descent::InnerLoopTrace;
use crate::stationarity::MoreauResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point must have at least one coordinate")]
    EmptyPoint,

    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("oracle returned a non-finite value or subgradient")]
    NonFiniteEvaluation,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cuts are anchored at different points")]
    AnchorMismatch,

    #[error("aggregate cut slope is not rho * (center - anchor)")]
    NonCanonicalAggregate,

    /// A computed approximation gap is negative: some cut fails to minorize the
    /// convexified function, so the declared weak-convexity modulus is too small.
    #[error(
        "model fails to minorize f + (m/2)|. - center|^2 (declared m = {m} too small?): \
         gap {gap:e} at point {point:?} for center {center:?}"
    )]
    ModelNotMinorant {
        m: f64,
        gap: f64,
        center: Point,
        point: Point,
    },

    #[error("inner loop did not pass the descent test within {budget} iterations")]
    InnerBudgetExhausted {
        budget: usize,
        partial: Box<InnerLoopTrace>,
    },

    #[error("evaluation budget of {budget} exhausted")]
    EvaluationBudgetExhausted {
        budget: u64,
        partial: Box<InnerLoopTrace>,
    },

    #[error("reference solver stopped after {iterations} iterations with gap {gap:e} > tolerance {tol:e}")]
    ReferenceBudgetExhausted {
        iterations: usize,
        gap: f64,
        tol: f64,
        /// The bracket reached when the budget ran out.
        partial: Box<MoreauResult>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed instance file: {0}")]
    Format(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
