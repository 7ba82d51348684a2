//! Instance complexity: `H_R`, its worst-case bound, the lower-bound value of a
//! design and the oracle's predicted sample count.

use serde::Serialize;

use crate::design::{objective_value, solve_design, Design, DesignObjective, FwParams};
use crate::error::Result;
use crate::instance::Instance;

/// `H_R = min_λ max_{y ∈ Y(x*)} max_{x' ≠ x*} min_{y'} ‖x*-y-(x'-y')‖²_{A_λ⁻¹} / Δ(x*,y,x',y')²`,
/// approximated by Frank-Wolfe on the oracle objective.
pub fn h_r(instance: &Instance, fw: &FwParams) -> Result<f64> {
    Ok(solve_design(&DesignObjective::Oracle, instance, fw)?.value)
}

/// `4d / min_{x ≠ x*} Δ_r(x*, x)²`
pub fn worst_case_bound(instance: &Instance) -> f64 {
    let gap = instance.min_robust_gap();
    4.0 * instance.dim() as f64 / (gap * gap)
}

/// `C_δ = 2 log(1/(2δ))`
pub fn lower_bound_constant(delta: f64) -> f64 {
    2.0 * (1.0 / (2.0 * delta)).ln()
}

/// `C_δ` times the oracle objective at `design`.
pub fn lower_bound_value(instance: &Instance, design: &Design, delta: f64) -> Result<f64> {
    let c = lower_bound_constant(delta);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * objective_value(&DesignObjective::Oracle, instance, design)?)
}

/// `N* = 2 log(|Z|²/δ) H_R`
pub fn oracle_predicted_n_from(instance: &Instance, h_r: f64, delta: f64) -> f64 {
    let z = instance.n_diffs() as f64;
    2.0 * (z * z / delta).ln() * h_r
}

pub fn oracle_predicted_n(instance: &Instance, delta: f64, fw: &FwParams) -> Result<f64> {
    Ok(oracle_predicted_n_from(instance, h_r(instance, fw)?, delta))
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexityReport {
    #[serde(rename = "H_R")]
    pub h_r: f64,
    pub worst_case_bound: f64,
    #[serde(rename = "N_star")]
    pub n_star: f64,
    #[serde(rename = "C_delta_H_R")]
    pub lower_bound: f64,
    pub delta: f64,
}

pub fn complexity_report(instance: &Instance, delta: f64, fw: &FwParams) -> Result<ComplexityReport> {
    let h = h_r(instance, fw)?;
    Ok(ComplexityReport {
        h_r: h,
        worst_case_bound: worst_case_bound(instance),
        n_star: oracle_predicted_n_from(instance, h, delta),
        lower_bound: lower_bound_constant(delta) * h,
        delta,
    })
}
