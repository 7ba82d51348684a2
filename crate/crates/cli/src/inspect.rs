use std::path::Path;

use rbai::complexity::{complexity_report, ComplexityReport};
use rbai::design::design_matrix;
use rbai::{Design, FwParams, Instance};
use serde::Serialize;

use crate::error::{io_err, CliResult};

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub details: Option<InstanceDetails>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceDetails {
    pub dim: usize,
    pub n_arms: usize,
    pub n_diffs: usize,
    /// Smallest over largest eigenvalue of `Σ z zᵀ`.
    pub span_ratio: f64,
    pub best_arm: usize,
    pub robust_values: Vec<f64>,
    pub min_robust_gap: f64,
}

pub fn describe(instance: &Instance) -> InstanceDetails {
    let uniform = Design::uniform(instance.n_diffs());
    let eig = design_matrix(instance, uniform.weights()).symmetric_eigen().eigenvalues;
    let values = instance.robust_values(instance.theta());
    let best = instance.best_robust_arm();
    InstanceDetails {
        dim: instance.dim(),
        n_arms: instance.n_arms(),
        n_diffs: instance.n_diffs(),
        span_ratio: eig.min() / eig.max(),
        best_arm: best,
        min_robust_gap: instance.min_robust_gap(),
        robust_values: values,
    }
}

/// Parses an instance file, reporting validation failures as data.
pub fn validate_file(path: &Path) -> CliResult<Diagnostics> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(match serde_json::from_str::<Instance>(&text) {
        Ok(inst) => Diagnostics { valid: true, error: None, details: Some(describe(&inst)) },
        Err(e) => Diagnostics { valid: false, error: Some(e.to_string()), details: None },
    })
}

pub fn complexity_file(path: &Path, delta: f64) -> CliResult<ComplexityReport> {
    let inst = crate::experiment::load_instance(path)?;
    Ok(complexity_report(&inst, delta, &FwParams::default())?)
}
