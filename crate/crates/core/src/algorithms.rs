//! The three δ-PAC strategies: oracle static allocation, robust static
//! G-allocation, and Robust RAGE phased elimination.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{round_design, solve_design, Design, DesignObjective, FwParams};
use crate::environments::RewardSampler;
use crate::error::{RbaiError, Result};
use crate::estimation::{Estimator, PrecisionFactor};
use crate::instance::{argmax_lowest, Instance};

pub const DEFAULT_MAX_PULLS: u64 = 10_000_000;
pub const ORACLE_GAMMA: f64 = 1.1;
pub const STATIC_GAMMA: f64 = 1.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Oracle,
    Static,
    Rage,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Oracle, Strategy::Static, Strategy::Rage];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Oracle => "oracle",
            Strategy::Static => "static",
            Strategy::Rage => "rage",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = RbaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Strategy::Oracle),
            "static" => Ok(Strategy::Static),
            "rage" => Ok(Strategy::Rage),
            other => Err(RbaiError::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Per-phase confidence schedule for Robust RAGE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaSchedule {
    /// `δ_t = δ / t²`
    #[default]
    Alg1,
    /// `δ_t = δ² / t²`
    Squared,
}

impl DeltaSchedule {
    pub fn phase_delta(self, delta: f64, t: usize) -> f64 {
        let t2 = (t * t) as f64;
        match self {
            DeltaSchedule::Alg1 => delta / t2,
            DeltaSchedule::Squared => delta * delta / t2,
        }
    }
}

impl FromStr for DeltaSchedule {
    type Err = RbaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alg1" => Ok(DeltaSchedule::Alg1),
            "squared" => Ok(DeltaSchedule::Squared),
            other => Err(RbaiError::InvalidConfig(format!("unknown delta schedule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub delta: f64,
    pub eps: f64,
    /// Phase growth factor for the static strategies. `None` picks 1.1 for the
    /// oracle and 1.3 for robust static.
    pub gamma: Option<f64>,
    pub fw: FwParams,
    pub seed: u64,
    pub max_pulls: u64,
    pub delta_schedule: DeltaSchedule,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            delta: 0.05,
            eps: 0.1,
            gamma: None,
            fw: FwParams::default(),
            seed: 0,
            max_pulls: DEFAULT_MAX_PULLS,
            delta_schedule: DeltaSchedule::Alg1,
        }
    }
}

impl StrategyConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        StrategyConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(RbaiError::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(RbaiError::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if let Some(g) = self.gamma {
            if !(g > 1.0 && g.is_finite()) {
                return Err(RbaiError::InvalidConfig(format!("gamma must exceed 1, got {g}")));
            }
        }
        if self.max_pulls == 0 {
            return Err(RbaiError::InvalidConfig("max_pulls must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub active: Vec<usize>,
    /// Objective value of the design sampled in this phase.
    pub design_value: f64,
    pub pulls: u64,
    pub delta: f64,
    /// `r(ε)` of the design used in this phase.
    pub rounding_floor: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub recommended_arm: usize,
    pub total_pulls: u64,
    pub phases: Vec<PhaseRecord>,
    pub correct: bool,
}

/// Empirical best robust arm `argmax_x min_y (x - y)ᵀθ̂`.
pub fn recommend(estimator: &Estimator, instance: &Instance) -> Result<usize> {
    Ok(recommend_theta(&estimator.theta_hat()?, instance))
}

pub fn recommend_theta(theta_hat: &DVector<f64>, instance: &Instance) -> usize {
    argmax_lowest(&instance.robust_values(theta_hat))
}

/// Difference vectors pre-multiplied by the whitener of a fixed `A`, so that
/// `‖z_a - z_b‖_{A⁻¹}` costs `O(d)`.
struct WhitenedDiffs {
    cols: DMatrix<f64>,
}

impl WhitenedDiffs {
    fn new(factor: &PrecisionFactor, instance: &Instance) -> Self {
        let cols: Vec<DVector<f64>> = instance.diff_set().iter().map(|d| factor.whiten(&d.z)).collect();
        WhitenedDiffs {
            cols: DMatrix::from_columns(&cols),
        }
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        self.cols
            .column(a)
            .iter()
            .zip(self.cols.column(b).iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

fn confidence_scale(instance: &Instance, delta: f64) -> f64 {
    let n = instance.n_diffs() as f64;
    (2.0 * (n * n / delta).ln()).sqrt()
}

/// Empirical stopping rule for the static strategy. Returns the witnessing arm
/// `x` such that for every `y ∈ Y(x)` and every `x'` some `y' ∈ Y(x')` has
/// `‖x-y-(x'-y')‖_{A⁻¹} √(2 log(|Z|²/δ)) ≤ (x-y-(x'-y'))ᵀθ̂`.
pub fn stopping_condition_static(
    estimator: &Estimator,
    instance: &Instance,
    delta: f64,
) -> Result<Option<usize>> {
    let factor = estimator.factor()?;
    let theta_hat = factor.solve(estimator.moment());
    let white = WhitenedDiffs::new(&factor, instance);
    let scale = confidence_scale(instance, delta);
    let means: Vec<f64> = instance.diff_set().iter().map(|d| d.z.dot(&theta_hat)).collect();

    let witness = (0..instance.n_arms()).find(|&x| {
        instance.diffs_of(x).all(|i| {
            (0..instance.n_arms()).all(|xp| {
                instance
                    .diffs_of(xp)
                    .any(|j| white.dist(i, j) * scale <= means[i] - means[j])
            })
        })
    });
    Ok(witness)
}

/// Oracle stopping rule: for every `y ∈ Y(x*)` and `x' ≠ x*` some `y'` has
/// `‖x*-y-(x'-y')‖_{A⁻¹} √(2 log(|Z|²/δ)) ≤ Δ(x*, y, x', y')` with true gaps.
pub fn stopping_condition_oracle(estimator: &Estimator, instance: &Instance, delta: f64) -> Result<bool> {
    let factor = estimator.factor()?;
    let white = WhitenedDiffs::new(&factor, instance);
    let scale = confidence_scale(instance, delta);
    let best = instance.best_robust_arm();
    let means: Vec<f64> = instance.diff_set().iter().map(|d| d.z.dot(instance.theta())).collect();
    Ok(instance.diffs_of(best).all(|i| {
        (0..instance.n_arms()).filter(|&xp| xp != best).all(|xp| {
            instance
                .diffs_of(xp)
                .any(|j| white.dist(i, j) * scale <= means[i] - means[j])
        })
    }))
}

fn aborted(strategy: Strategy, instance: &Instance, est: Option<&Estimator>, fallback: usize, phases: Vec<PhaseRecord>) -> RbaiError {
    let recommended_arm = est
        .and_then(|e| recommend(e, instance).ok())
        .unwrap_or(fallback);
    let total_pulls = phases.iter().map(|p| p.pulls).sum();
    RbaiError::AbortedBudget(Box::new(RunResult {
        strategy,
        recommended_arm,
        total_pulls,
        phases,
        correct: recommended_arm == instance.best_robust_arm(),
    }))
}

/// Samples one fixed design in growing phases: at phase `t` the cumulative
/// allocation is topped up to the rounding of `⌈γ^t⌉` pulls (phases below
/// `r(ε)` are skipped), then `stop` is checked on the cumulative estimator.
fn run_fixed_design(
    strategy: Strategy,
    instance: &Instance,
    config: &StrategyConfig,
    design: &Design,
    design_value: f64,
    gamma: f64,
    stop: impl Fn(&Estimator) -> Result<bool>,
) -> Result<RunResult> {
    let floor = design.rounding_threshold(config.eps);
    let mut sampler = RewardSampler::new(instance, config.seed);
    let mut est = Estimator::new(instance.dim());
    let mut pulled = vec![0u64; instance.n_diffs()];
    let mut total = 0u64;
    let mut phases = Vec::new();
    let mut t = 0usize;
    loop {
        t += 1;
        let target = gamma.powi(t as i32).ceil();
        if target < floor as f64 {
            continue;
        }
        if target > config.max_pulls as f64 {
            return Err(aborted(strategy, instance, Some(&est), 0, phases));
        }
        let counts = round_design(design, target as u64, config.eps)?;
        let extra: Vec<u64> = counts.iter().zip(&pulled).map(|(c, p)| c.saturating_sub(*p)).collect();
        let phase_pulls: u64 = extra.iter().sum();
        if total + phase_pulls > config.max_pulls {
            return Err(aborted(strategy, instance, Some(&est), 0, phases));
        }
        for (i, &k) in extra.iter().enumerate() {
            if k > 0 {
                let sum = sampler.pull_sum(i, k);
                est.update_batch(&instance.diff_set()[i].z, k, sum)?;
                pulled[i] += k;
            }
        }
        total += phase_pulls;
        phases.push(PhaseRecord {
            phase: t,
            active: (0..instance.n_arms()).collect(),
            design_value,
            pulls: phase_pulls,
            delta: config.delta,
            rounding_floor: floor,
        });
        if phase_pulls > 0 && stop(&est)? {
            break;
        }
    }
    let recommended_arm = recommend(&est, instance)?;
    Ok(RunResult {
        strategy,
        recommended_arm,
        total_pulls: total,
        phases,
        correct: recommended_arm == instance.best_robust_arm(),
    })
}

/// Robust static allocation: sample the G-optimal design in phases of `γ^t`
/// cumulative pulls until the empirical stopping rule fires.
pub fn run_static(instance: &Instance, config: &StrategyConfig) -> Result<RunResult> {
    config.validate()?;
    let sol = solve_design(&DesignObjective::GAllocation, instance, &config.fw)?;
    let gamma = config.gamma.unwrap_or(STATIC_GAMMA);
    run_fixed_design(Strategy::Static, instance, config, &sol.design, sol.value, gamma, |est| {
        Ok(stopping_condition_static(est, instance, config.delta)?.is_some())
    })
}

/// Oracle allocation: sample the `H_R`-optimal design (computed from the true
/// θ) until the oracle stopping rule fires.
pub fn run_oracle(instance: &Instance, config: &StrategyConfig) -> Result<RunResult> {
    config.validate()?;
    let sol = solve_design(&DesignObjective::Oracle, instance, &config.fw)?;
    let gamma = config.gamma.unwrap_or(ORACLE_GAMMA);
    run_fixed_design(Strategy::Oracle, instance, config, &sol.design, sol.value, gamma, |est| {
        stopping_condition_oracle(est, instance, config.delta)
    })
}

/// `N_t = max{⌈2^{2t+1} ρ (1+ε) log(|Z|²/δ_t)⌉, r(ε)}`
pub fn rage_phase_pulls(t: usize, rho: f64, eps: f64, n_diffs: usize, delta_t: f64, floor: u64) -> f64 {
    let z2 = (n_diffs * n_diffs) as f64;
    let scaled = (2.0f64.powi(2 * t as i32 + 1) * rho * (1.0 + eps) * (z2 / delta_t).ln()).ceil();
    scaled.max(floor as f64)
}

/// Arms of `active` that some other active arm beats with confidence: `x` is
/// dropped if `∃x'` such that `∀y' ∈ Y(x') ∃y ∈ Y(x)` with
/// `‖x-y-(x'-y')‖_{A⁻¹} √(2 log(|Z|²/δ_t)) < (x'-y'-(x-y))ᵀθ̂`.
pub fn rage_eliminate(
    instance: &Instance,
    active: &[usize],
    estimator: &Estimator,
    delta_t: f64,
) -> Result<Vec<usize>> {
    let factor = estimator.factor()?;
    let theta_hat = factor.solve(estimator.moment());
    let white = WhitenedDiffs::new(&factor, instance);
    let scale = confidence_scale(instance, delta_t);
    let means: Vec<f64> = instance.diff_set().iter().map(|d| d.z.dot(&theta_hat)).collect();
    let dominated = |x: usize| {
        active.iter().filter(|&&xp| xp != x).any(|&xp| {
            instance.diffs_of(xp).all(|j| {
                instance
                    .diffs_of(x)
                    .any(|i| white.dist(i, j) * scale < means[j] - means[i])
            })
        })
    };
    Ok(active.iter().copied().filter(|&x| !dominated(x)).collect())
}

/// Robust RAGE. Each phase solves the phase design over the surviving arms,
/// pulls `N_t` rounded samples, refits θ̂ from that phase alone and eliminates.
pub fn run_rage(instance: &Instance, config: &StrategyConfig) -> Result<RunResult> {
    config.validate()?;
    let mut sampler = RewardSampler::new(instance, config.seed);
    let mut active: Vec<usize> = (0..instance.n_arms()).collect();
    let mut phases: Vec<PhaseRecord> = Vec::new();
    let mut total = 0u64;
    let mut last_est: Option<Estimator> = None;
    let mut t = 1usize;
    while active.len() > 1 {
        let delta_t = config.delta_schedule.phase_delta(config.delta, t);
        let objective = DesignObjective::RagePhase { active: active.clone() };
        let sol = solve_design(&objective, instance, &config.fw)?;
        let floor = sol.design.rounding_threshold(config.eps);
        let n_t = rage_phase_pulls(t, sol.value, config.eps, instance.n_diffs(), delta_t, floor);
        if !n_t.is_finite() || total as f64 + n_t > config.max_pulls as f64 {
            return Err(aborted(Strategy::Rage, instance, last_est.as_ref(), active[0], phases));
        }
        let n_t = n_t as u64;
        let counts = round_design(&sol.design, n_t, config.eps)?;

        let mut est = Estimator::new(instance.dim());
        for (i, &k) in counts.iter().enumerate() {
            if k > 0 {
                let sum = sampler.pull_sum(i, k);
                est.update_batch(&instance.diff_set()[i].z, k, sum)?;
            }
        }
        total += n_t;
        phases.push(PhaseRecord {
            phase: t,
            active: active.clone(),
            design_value: sol.value,
            pulls: n_t,
            delta: delta_t,
            rounding_floor: floor,
        });
        active = rage_eliminate(instance, &active, &est, delta_t)?;
        last_est = Some(est);
        t += 1;
    }
    let recommended_arm = active[0];
    Ok(RunResult {
        strategy: Strategy::Rage,
        recommended_arm,
        total_pulls: total,
        phases,
        correct: recommended_arm == instance.best_robust_arm(),
    })
}

pub fn run_strategy(strategy: Strategy, instance: &Instance, config: &StrategyConfig) -> Result<RunResult> {
    match strategy {
        Strategy::Oracle => run_oracle(instance, config),
        Strategy::Static => run_static(instance, config),
        Strategy::Rage => run_rage(instance, config),
    }
}
