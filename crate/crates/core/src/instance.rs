//! Problem instances and the exact (θ-aware) quantities defined on them.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RbaiError, Result};

/// Relative eigenvalue threshold for the span check on the difference set.
pub const SPAN_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance under which two robust values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub id: usize,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarySet {
    pub arm_id: usize,
    pub actions: Vec<Vec<f64>>,
}

/// One element `z = x - y` of the difference set.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffVector {
    pub arm_id: usize,
    pub adv_index: usize,
    pub z: DVector<f64>,
}

/// Serialized form; field order is the on-disk order.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceDoc {
    dim: usize,
    noise_std: f64,
    arms: Vec<Arm>,
    adversaries: Vec<AdversarySet>,
    theta: Vec<f64>,
}

/// A validated robust linear bandit instance.
///
/// Construction checks that every vector has dimension `dim`, that every arm has
/// a nonempty adversary set, that all difference vectors are pairwise distinct,
/// that they span `R^dim`, and that the best robust arm is unique.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct Instance {
    dim: usize,
    noise_std: f64,
    arms: Vec<Arm>,
    adversaries: Vec<AdversarySet>,
    theta: DVector<f64>,
    diffs: Vec<DiffVector>,
    offsets: Vec<usize>,
    norm_bound: f64,
    best: usize,
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = RbaiError;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        Instance::new(doc.dim, doc.arms, doc.adversaries, doc.theta, doc.noise_std)
    }
}

impl From<Instance> for InstanceDoc {
    fn from(inst: Instance) -> Self {
        InstanceDoc {
            dim: inst.dim,
            noise_std: inst.noise_std,
            arms: inst.arms,
            adversaries: inst.adversaries,
            theta: inst.theta.iter().copied().collect(),
        }
    }
}

fn check_vector(what: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(RbaiError::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(RbaiError::InvalidInstance(format!(
            "{what} has a non-finite entry"
        )));
    }
    Ok(())
}

impl Instance {
    /// Builds and validates an instance. Adversary sets may be given in any
    /// order but there must be exactly one per arm, and arm ids must be `0..n`.
    pub fn new(
        dim: usize,
        arms: Vec<Arm>,
        mut adversaries: Vec<AdversarySet>,
        theta: Vec<f64>,
        noise_std: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(RbaiError::InvalidInstance("dimension must be positive".into()));
        }
        if arms.is_empty() {
            return Err(RbaiError::InvalidInstance("instance has no arms".into()));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(RbaiError::InvalidInstance(format!(
                "noise_std must be finite and non-negative, got {noise_std}"
            )));
        }
        check_vector("theta", &theta, dim)?;
        for (i, arm) in arms.iter().enumerate() {
            if arm.id != i {
                return Err(RbaiError::InvalidInstance(format!(
                    "arm at position {i} has id {}",
                    arm.id
                )));
            }
            check_vector("arm features", &arm.features, dim)?;
        }
        adversaries.sort_by_key(|a| a.arm_id);
        if adversaries.len() != arms.len()
            || adversaries.iter().enumerate().any(|(i, a)| a.arm_id != i)
        {
            return Err(RbaiError::InvalidInstance(
                "expected exactly one adversary set per arm".into(),
            ));
        }

        let mut diffs = Vec::new();
        let mut offsets = Vec::with_capacity(arms.len() + 1);
        for (arm, adv) in arms.iter().zip(&adversaries) {
            if adv.actions.is_empty() {
                return Err(RbaiError::InvalidInstance(format!(
                    "arm {} has an empty adversary set",
                    arm.id
                )));
            }
            offsets.push(diffs.len());
            let x = DVector::from_column_slice(&arm.features);
            for (j, y) in adv.actions.iter().enumerate() {
                check_vector("adversary action", y, dim)?;
                diffs.push(DiffVector {
                    arm_id: arm.id,
                    adv_index: j,
                    z: &x - DVector::from_column_slice(y),
                });
            }
        }
        offsets.push(diffs.len());

        for (i, a) in diffs.iter().enumerate() {
            if let Some(b) = diffs[i + 1..].iter().find(|b| b.z == a.z) {
                return Err(RbaiError::InvalidInstance(format!(
                    "difference vectors (arm {}, action {}) and (arm {}, action {}) coincide",
                    a.arm_id, a.adv_index, b.arm_id, b.adv_index
                )));
            }
        }

        let mut gram = DMatrix::zeros(dim, dim);
        for d in &diffs {
            gram.ger(1.0, &d.z, &d.z, 1.0);
        }
        let eig = gram.symmetric_eigenvalues();
        let max = eig.max();
        if !(max > 0.0) || eig.min() < SPAN_TOLERANCE * max {
            return Err(RbaiError::NonSpanning { dim });
        }

        let norm_bound = diffs.iter().map(|d| d.z.norm()).fold(0.0, f64::max);
        let theta = DVector::from_vec(theta);
        let mut inst = Instance {
            dim,
            noise_std,
            arms,
            adversaries,
            theta,
            diffs,
            offsets,
            norm_bound,
            best: 0,
        };
        inst.best = inst.unique_best()?;
        Ok(inst)
    }

    fn unique_best(&self) -> Result<usize> {
        let values = self.robust_values(&self.theta);
        let best = argmax_lowest(&values);
        if let Some(second) = (0..values.len())
            .find(|&i| i != best && (values[best] - values[i]).abs() <= TIE_TOLERANCE)
        {
            let (first, second) = (best.min(second), best.max(second));
            return Err(RbaiError::NonUniqueBest {
                first,
                second,
                value: values[best],
            });
        }
        Ok(best)
    }

    /// Same arms and adversaries with a different reward parameter.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Instance::new(
            self.dim,
            self.arms.clone(),
            self.adversaries.clone(),
            theta,
            self.noise_std,
        )
    }

    /// Same instance with a different noise scale.
    pub fn with_noise_std(&self, noise_std: f64) -> Result<Self> {
        Instance::new(
            self.dim,
            self.arms.clone(),
            self.adversaries.clone(),
            self.theta.iter().copied().collect(),
            noise_std,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn adversaries(&self) -> &[AdversarySet] {
        &self.adversaries
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// `max ‖z‖₂` over the difference set. Recorded only.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// All difference vectors, arm index major and adversary index minor.
    pub fn diff_set(&self) -> &[DiffVector] {
        &self.diffs
    }

    pub fn n_diffs(&self) -> usize {
        self.diffs.len()
    }

    /// Indices into [`Instance::diff_set`] belonging to `arm`.
    pub fn diffs_of(&self, arm: usize) -> Range<usize> {
        self.offsets[arm]..self.offsets[arm + 1]
    }

    pub fn diff_index(&self, arm: usize, adv_index: usize) -> usize {
        debug_assert!(adv_index < self.offsets[arm + 1] - self.offsets[arm]);
        self.offsets[arm] + adv_index
    }

    pub fn z(&self, arm: usize, adv_index: usize) -> &DVector<f64> {
        &self.diffs[self.diff_index(arm, adv_index)].z
    }

    /// `min_y (x - y)ᵀθ'` for every arm under an arbitrary parameter.
    pub fn robust_values(&self, theta: &DVector<f64>) -> Vec<f64> {
        (0..self.n_arms())
            .map(|a| {
                self.diffs_of(a)
                    .map(|i| self.diffs[i].z.dot(theta))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn robust_value(&self, arm: usize) -> f64 {
        self.diffs_of(arm)
            .map(|i| self.diffs[i].z.dot(&self.theta))
            .fold(f64::INFINITY, f64::min)
    }

    /// The unique best robust arm under the true parameter.
    pub fn best_robust_arm(&self) -> usize {
        self.best
    }

    /// Robust value gap `Δ_r(a, b)`.
    pub fn robust_gap(&self, a: usize, b: usize) -> f64 {
        self.robust_value(a) - self.robust_value(b)
    }

    /// `(x - y - (x' - y'))ᵀθ`.
    pub fn quad_gap(&self, x: usize, y: usize, xp: usize, yp: usize) -> f64 {
        (self.z(x, y) - self.z(xp, yp)).dot(&self.theta)
    }

    /// Smallest robust gap between the best arm and any other arm.
    /// Infinite for single-arm instances.
    pub fn min_robust_gap(&self) -> f64 {
        let best = self.best;
        (0..self.n_arms())
            .filter(|&a| a != best)
            .map(|a| self.robust_gap(best, a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Index of the largest entry; lowest index wins ties.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
