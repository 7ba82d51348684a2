use thiserror::Error;

use crate::algorithms::RunResult;

pub type Result<T> = std::result::Result<T, RbaiError>;

#[derive(Debug, Error)]
pub enum RbaiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("difference vectors do not span R^{dim}")]
    NonSpanning { dim: usize },

    #[error("best robust arm is not unique: arms {first} and {second} tie at {value}")]
    NonUniqueBest { first: usize, second: usize, value: f64 },

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("rounding budget {n} is below the minimum {required}")]
    InsufficientBudget { n: u64, required: u64 },

    #[error("difference vector (arm {arm_id}, action {adv_index}) does not belong to this instance")]
    ForeignDiffVector { arm_id: usize, adv_index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pull budget exhausted after {} pulls", .0.total_pulls)]
    AbortedBudget(Box<RunResult>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
