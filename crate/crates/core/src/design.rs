//! Allocation designs over the difference set: the three minimax objectives,
//! a Frank-Wolfe solver for them, and efficient rounding to integer pull counts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RbaiError, Result};
use crate::estimation::PrecisionFactor;
use crate::instance::Instance;

/// Weights at or below this count as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

/// A probability vector aligned with [`Instance::diff_set`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Design {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Design {
    type Error = RbaiError;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Design::new(weights)
    }
}

impl From<Design> for Vec<f64> {
    fn from(d: Design) -> Self {
        d.weights
    }
}

impl Design {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RbaiError::InvalidDesign("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RbaiError::InvalidDesign("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(RbaiError::InvalidDesign(format!("weights sum to {total}")));
        }
        Ok(Design { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Design {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `index`.
    pub fn vertex(n: usize, index: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Design { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `‖λ‖₀` with the support threshold applied.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > SUPPORT_THRESHOLD).count()
    }

    /// Minimum budget `r(ε) = ⌈2‖λ‖₀ / ε⌉` accepted by [`round_design`].
    pub fn rounding_threshold(&self, eps: f64) -> u64 {
        (2.0 * self.support_size() as f64 / eps).ceil() as u64
    }
}

/// `A_λ = Σ_z λ(z) z zᵀ`.
pub fn design_matrix(instance: &Instance, weights: &[f64]) -> DMatrix<f64> {
    let d = instance.dim();
    let mut a = DMatrix::zeros(d, d);
    for (dv, &w) in instance.diff_set().iter().zip(weights) {
        if w != 0.0 {
            a.ger(w, &dv.z, &dv.z, 1.0);
        }
    }
    a
}

/// Which minimax criterion a design is optimized for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DesignObjective {
    /// `max_z ‖z‖²_{A_λ⁻¹}`
    GAllocation,
    /// The `H_R` objective. Uses the true parameter of the instance.
    Oracle,
    /// The elimination-phase objective restricted to the active arms.
    RagePhase { active: Vec<usize> },
}

#[derive(Clone, Copy, Debug)]
struct Alternative {
    plus: usize,
    minus: Option<usize>,
    inv_gap_sq: f64,
}

/// `max_terms min_alternatives ‖z_plus - z_minus‖²_{A⁻¹} · inv_gap_sq`, with all
/// vectors referenced by their index in the difference set.
struct CompiledObjective {
    alternatives: Vec<Alternative>,
    term_ends: Vec<usize>,
}

struct Evaluation {
    value: f64,
    /// Inner arg-min alternative and value of every term.
    terms: Vec<(f64, Option<Alternative>)>,
}

impl CompiledObjective {
    fn new(objective: &DesignObjective, instance: &Instance) -> Self {
        let mut out = CompiledObjective {
            alternatives: Vec::new(),
            term_ends: Vec::new(),
        };
        match objective {
            DesignObjective::GAllocation => {
                for i in 0..instance.n_diffs() {
                    out.push_term([Alternative {
                        plus: i,
                        minus: None,
                        inv_gap_sq: 1.0,
                    }]);
                }
            }
            DesignObjective::RagePhase { active } => {
                for &x in active {
                    for i in instance.diffs_of(x) {
                        for &xp in active {
                            out.push_term(instance.diffs_of(xp).map(|j| Alternative {
                                plus: i,
                                minus: Some(j),
                                inv_gap_sq: 1.0,
                            }));
                        }
                    }
                }
            }
            DesignObjective::Oracle => {
                let best = instance.best_robust_arm();
                let theta = instance.theta();
                let diffs = instance.diff_set();
                for i in instance.diffs_of(best) {
                    for xp in (0..instance.n_arms()).filter(|&a| a != best) {
                        // Non-positive gaps are +∞ terms of the inner min.
                        out.push_term(instance.diffs_of(xp).filter_map(|j| {
                            let gap = (&diffs[i].z - &diffs[j].z).dot(theta);
                            (gap > 0.0).then(|| Alternative {
                                plus: i,
                                minus: Some(j),
                                inv_gap_sq: 1.0 / (gap * gap),
                            })
                        }));
                    }
                }
            }
        }
        out
    }

    fn push_term(&mut self, alts: impl IntoIterator<Item = Alternative>) {
        self.alternatives.extend(alts);
        self.term_ends.push(self.alternatives.len());
    }

    /// `whitened` holds `W z` column-wise for every z.
    fn evaluate(&self, whitened: &DMatrix<f64>) -> Evaluation {
        let mut terms = Vec::with_capacity(self.term_ends.len());
        let mut start = 0;
        for &end in &self.term_ends {
            let mut term = f64::INFINITY;
            let mut arg = None;
            for alt in &self.alternatives[start..end] {
                let sq = alt_norm_sq(whitened, alt) * alt.inv_gap_sq;
                if sq < term {
                    term = sq;
                    arg = Some(*alt);
                }
            }
            terms.push((term, arg));
            start = end;
        }
        let value = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        Evaluation {
            value: if terms.is_empty() { 0.0 } else { value },
            terms,
        }
    }
}

fn alt_norm_sq(whitened: &DMatrix<f64>, alt: &Alternative) -> f64 {
    let plus = whitened.column(alt.plus);
    match alt.minus {
        Some(m) => plus
            .iter()
            .zip(whitened.column(m).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum(),
        None => plus.norm_squared(),
    }
}

fn diff_matrix(instance: &Instance) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = instance.diff_set().iter().map(|d| d.z.clone()).collect();
    DMatrix::from_columns(&cols)
}

fn check_len(instance: &Instance, design: &Design) -> Result<()> {
    if design.len() != instance.n_diffs() {
        return Err(RbaiError::DimensionMismatch {
            expected: instance.n_diffs(),
            got: design.len(),
        });
    }
    Ok(())
}

/// Objective value of `design`; `+∞` when `A_λ` is singular.
pub fn objective_value(
    objective: &DesignObjective,
    instance: &Instance,
    design: &Design,
) -> Result<f64> {
    check_len(instance, design)?;
    let compiled = CompiledObjective::new(objective, instance);
    let Ok(factor) = PrecisionFactor::new(&design_matrix(instance, design.weights())) else {
        return Ok(f64::INFINITY);
    };
    let whitened = factor_whiten(&factor, &diff_matrix(instance));
    Ok(compiled.evaluate(&whitened).value)
}

fn factor_whiten(factor: &PrecisionFactor, zs: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = zs.column_iter().map(|c| factor.whiten(&c.into_owned())).collect();
    DMatrix::from_columns(&cols)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FwParams {
    pub max_iters: usize,
    /// Relative decrease of the best value over `window` iterations that stops the solver.
    pub tol: f64,
    pub window: usize,
    /// Iterations run before the stopping test is consulted.
    pub min_iters: usize,
    /// Softmax temperature, relative to the current value, used to weight
    /// near-active terms in the linearization. Zero linearizes only the
    /// arg-max term.
    pub smoothing: f64,
}

impl Default for FwParams {
    fn default() -> Self {
        FwParams {
            max_iters: 5000,
            tol: 1e-3,
            window: 10,
            min_iters: 500,
            smoothing: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DesignSolution {
    pub design: Design,
    pub value: f64,
    pub iterations: usize,
    /// Best value seen at each iteration (non-increasing).
    pub trace: Vec<f64>,
}

/// Frank-Wolfe over the simplex for a max-min objective.
///
/// Starts from the uniform design. Each term's value is taken at its inner
/// arg-min vector `v`, whose gradient in `λ(z)` is `-(vᵀA_λ⁻¹z)²`. With
/// `smoothing = 0` the vertex maximizes `(vᵀA_λ⁻¹z)²` for the arg-max term
/// alone; otherwise terms near the max are weighted by a softmax, which keeps
/// the iterates from locking onto two alternating vertices at a kink. The step
/// is `2/(k+2)`. The objective is not smooth, so the iterates need not
/// decrease it monotonically; the best design seen is returned.
pub fn solve_design(
    objective: &DesignObjective,
    instance: &Instance,
    params: &FwParams,
) -> Result<DesignSolution> {
    let n = instance.n_diffs();
    let compiled = CompiledObjective::new(objective, instance);
    let zs = diff_matrix(instance);
    let mut weights = vec![1.0 / n as f64; n];
    let mut best_value = f64::INFINITY;
    let mut best_weights = weights.clone();
    let mut trace = Vec::new();

    for k in 1..=params.max_iters.max(1) {
        let factor = match PrecisionFactor::new(&design_matrix(instance, &weights)) {
            Ok(f) => f,
            Err(_) if k == 1 => return Err(RbaiError::NonSpanning { dim: instance.dim() }),
            // The infimum sits on the boundary of the simplex; keep the best iterate.
            Err(_) => break,
        };
        let whitened = factor_whiten(&factor, &zs);
        let eval = compiled.evaluate(&whitened);
        if eval.value < best_value {
            best_value = eval.value;
            best_weights.copy_from_slice(&weights);
        }
        trace.push(best_value);

        if k > params.min_iters.max(params.window) {
            let earlier = trace[k - 1 - params.window];
            if earlier - best_value <= params.tol * earlier {
                break;
            }
        }

        // Gradient of the softmax-smoothed max: Σ_i w_i ∇term_i with
        // ∇_z term_i = -(v_iᵀA⁻¹z)²/g_i², accumulated as Σ_i w_i v_i v_iᵀ/g_i².
        let d = instance.dim();
        let mut curvature = DMatrix::zeros(d, d);
        let mut v = DVector::zeros(d);
        let band = params.smoothing * eval.value;
        for (value, alt) in &eval.terms {
            let Some(alt) = alt else { continue };
            let weight = if band > 0.0 {
                ((value - eval.value) / band).exp()
            } else if *value == eval.value {
                1.0
            } else {
                0.0
            };
            if weight < 1e-9 {
                continue;
            }
            v.copy_from(&whitened.column(alt.plus));
            if let Some(m) = alt.minus {
                v -= whitened.column(m);
            }
            curvature.ger(weight * alt.inv_gap_sq, &v, &v, 1.0);
        }
        let mut vertex = None;
        let mut top = 0.0;
        for (i, u) in whitened.column_iter().enumerate() {
            let score = (u.transpose() * &curvature * u)[(0, 0)];
            if score > top {
                top = score;
                vertex = Some(i);
            }
        }
        let Some(vertex) = vertex else { break };
        let gamma = 2.0 / (k as f64 + 2.0);
        for w in weights.iter_mut() {
            *w *= 1.0 - gamma;
        }
        weights[vertex] += gamma;
    }

    let total: f64 = best_weights.iter().sum();
    for w in best_weights.iter_mut() {
        *w /= total;
    }
    Ok(DesignSolution {
        design: Design {
            weights: best_weights,
        },
        value: best_value,
        iterations: trace.len(),
        trace,
    })
}

/// Efficient apportionment of `n` pulls to the design.
///
/// Starts from `⌈λ_z (n - p/2)⌉` on the support, then adds pulls where
/// `n_z/λ_z` is smallest or removes them where `(n_z - 1)/λ_z` is largest until
/// the counts sum to `n`. Requires `n ≥ ⌈2p/ε⌉`.
pub fn round_design(design: &Design, n: u64, eps: f64) -> Result<Vec<u64>> {
    if !(eps > 0.0) {
        return Err(RbaiError::InvalidConfig(format!("rounding eps must be positive, got {eps}")));
    }
    let required = design.rounding_threshold(eps);
    if n < required {
        return Err(RbaiError::InsufficientBudget { n, required });
    }
    let w = design.weights();
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > SUPPORT_THRESHOLD).collect();
    let p = support.len() as f64;
    let mut counts = vec![0u64; w.len()];
    for &i in &support {
        counts[i] = (w[i] * (n as f64 - p / 2.0)).ceil() as u64;
    }
    let mut total: u64 = counts.iter().sum();
    while total < n {
        let i = *support
            .iter()
            .min_by(|&&a, &&b| {
                (counts[a] as f64 / w[a]).total_cmp(&(counts[b] as f64 / w[b]))
            })
            .expect("nonempty support");
        counts[i] += 1;
        total += 1;
    }
    while total > n {
        // max_by returns the last maximum; scan manually for the lowest index
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for &i in &support {
            let score = (counts[i] as f64 - 1.0) / w[i];
            if counts[i] > 0 && score > best {
                best = score;
                pick = Some(i);
            }
        }
        let i = pick.expect("positive counts while total > n");
        counts[i] -= 1;
        total -= 1;
    }
    Ok(counts)
}
