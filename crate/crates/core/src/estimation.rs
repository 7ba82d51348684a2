//! Ordinary least squares over pulled difference vectors and the fixed-design
//! confidence widths built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{RbaiError, Result};

/// Relative eigenvalue threshold below which a design matrix is singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Accumulates `A = Σ z zᵀ` and `b = Σ z r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimator {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    pulls: u64,
}

impl Estimator {
    pub fn new(dim: usize) -> Self {
        Estimator {
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            pulls: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn update(&mut self, z: &DVector<f64>, reward: f64) -> Result<()> {
        self.update_batch(z, 1, reward)
    }

    /// Records `count` pulls of the same `z` whose rewards sum to `reward_sum`.
    /// Equivalent to `count` calls of [`Estimator::update`].
    pub fn update_batch(&mut self, z: &DVector<f64>, count: u64, reward_sum: f64) -> Result<()> {
        if z.len() != self.dim() {
            return Err(RbaiError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        if count == 0 {
            return Ok(());
        }
        self.gram.ger(count as f64, z, z, 1.0);
        self.moment.axpy(reward_sum, z, 1.0);
        self.pulls += count;
        Ok(())
    }

    pub fn factor(&self) -> Result<PrecisionFactor> {
        PrecisionFactor::new(&self.gram)
    }

    pub fn theta_hat(&self) -> Result<DVector<f64>> {
        Ok(self.factor()?.solve(&self.moment))
    }
}

/// Eigendecomposition-based inverse of a positive-definite matrix.
///
/// Stores `W = Λ^{-1/2} Qᵀ` so that `‖v‖²_{A⁻¹} = ‖W v‖²`. Computing it costs
/// one `O(d³)` decomposition; every norm afterwards is `O(d²)`, or `O(d)` on
/// vectors that were whitened once up front.
#[derive(Clone, Debug)]
pub struct PrecisionFactor {
    whitener: DMatrix<f64>,
}

impl PrecisionFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(RbaiError::SingularDesign);
        }
        let eig = a.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || !min.is_finite() || min < SINGULAR_TOLERANCE * max {
            return Err(RbaiError::SingularDesign);
        }
        let mut whitener = eig.eigenvectors.transpose();
        for (mut row, lambda) in whitener.row_iter_mut().zip(eig.eigenvalues.iter()) {
            row /= lambda.sqrt();
        }
        Ok(PrecisionFactor { whitener })
    }

    pub fn dim(&self) -> usize {
        self.whitener.nrows()
    }

    /// `W v`; inner products of whitened vectors are `A⁻¹` inner products.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.whitener * v
    }

    /// `‖v‖²_{A⁻¹}`
    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.whiten(v).norm_squared()
    }

    /// `A⁻¹ b`
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.whitener.tr_mul(&self.whiten(b))
    }
}

/// `‖v‖_{A⁻¹} · √log_term`. The caller supplies `log_term = 2 log(count/δ)`.
pub fn confidence_width(a: &DMatrix<f64>, v: &DVector<f64>, log_term: f64) -> Result<f64> {
    let factor = PrecisionFactor::new(a)?;
    if v.len() != factor.dim() {
        return Err(RbaiError::DimensionMismatch {
            expected: factor.dim(),
            got: v.len(),
        });
    }
    Ok(factor.norm_sq(v).sqrt() * log_term.sqrt())
}
