//! Robust best-arm identification (RBAI) for linear rewards.
//!
//! Each round the learner picks an arm `x` together with one of its adversarial
//! actions `y ∈ Y(x)` and observes `(x - y)ᵀθ + η`. The goal is to identify the
//! arm with the largest worst-case value `min_y (x - y)ᵀθ` with probability at
//! least `1 - δ`, using as few samples as possible.
//!
//! Modules:
//! - [`instance`]: arms, adversary sets, difference vectors and exact robust quantities.
//! - [`estimation`]: least-squares estimation and fixed-design confidence widths.
//! - [`design`]: Frank-Wolfe optimal-design solver and efficient rounding.
//! - [`algorithms`]: Oracle, Robust Static and Robust RAGE strategies.
//! - [`complexity`]: the `H_R` functional and related bounds.
//! - [`environments`]: synthetic instance generators and the reward sampler.

pub mod algorithms;
pub mod complexity;
pub mod design;
pub mod environments;
pub mod error;
pub mod estimation;
pub mod instance;

pub use algorithms::{
    recommend, run_oracle, run_rage, run_static, run_strategy, DeltaSchedule, PhaseRecord,
    RunResult, Strategy, StrategyConfig,
};
pub use design::{objective_value, round_design, solve_design, Design, DesignObjective, FwParams};
pub use error::{RbaiError, Result};
pub use estimation::{confidence_width, Estimator, PrecisionFactor};
pub use instance::{AdversarySet, Arm, DiffVector, Instance};
