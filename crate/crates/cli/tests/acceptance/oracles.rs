//! Reference computations built from the raw arm and action vectors with plain
//! nalgebra, sharing no code with the library's design or instance internals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rbai::{AdversarySet, Arm, Instance};

pub struct Raw {
    pub arms: Vec<DVector<f64>>,
    pub actions: Vec<Vec<DVector<f64>>>,
    pub theta: DVector<f64>,
}

impl Raw {
    pub fn of(inst: &Instance) -> Raw {
        Raw {
            arms: inst.arms().iter().map(|a| DVector::from_column_slice(&a.features)).collect(),
            actions: inst
                .adversaries()
                .iter()
                .map(|s| s.actions.iter().map(|y| DVector::from_column_slice(y)).collect())
                .collect(),
            theta: DVector::from_column_slice(inst.theta().as_slice()),
        }
    }

    /// Difference vectors, arm-major then action order.
    pub fn zs(&self) -> Vec<DVector<f64>> {
        self.arms
            .iter()
            .zip(&self.actions)
            .flat_map(|(x, ys)| ys.iter().map(move |y| x - y))
            .collect()
    }

    pub fn robust_values(&self) -> Vec<f64> {
        self.arms
            .iter()
            .zip(&self.actions)
            .map(|(x, ys)| ys.iter().map(|y| (x - y).dot(&self.theta)).fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn best(&self) -> usize {
        let v = self.robust_values();
        (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
    }
}

/// `A⁻¹` of `Σ w_z z zᵀ`, or `None` when the matrix is numerically singular.
pub fn inverse_gram(zs: &[DVector<f64>], w: &[f64]) -> Option<DMatrix<f64>> {
    let d = zs[0].len();
    let mut a = DMatrix::zeros(d, d);
    for (z, &wi) in zs.iter().zip(w) {
        if wi > 0.0 {
            a += z * z.transpose() * wi;
        }
    }
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 1e-12 * eig.eigenvalues.max().max(0.0) {
        return None;
    }
    a.try_inverse()
}

fn quad(inv: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * inv * v)[(0, 0)]
}

/// `max_z ‖z‖²_{A_w⁻¹}`
pub fn g_value(zs: &[DVector<f64>], w: &[f64]) -> f64 {
    match inverse_gram(zs, w) {
        Some(inv) => zs.iter().map(|z| quad(&inv, z)).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// `max_{y, x' ≠ x*} min_{y': Δ > 0} ‖x*-y-(x'-y')‖²_{A_w⁻¹} / Δ²`
pub fn oracle_value(raw: &Raw, w: &[f64]) -> f64 {
    let zs = raw.zs();
    let Some(inv) = inverse_gram(&zs, w) else {
        return f64::INFINITY;
    };
    let best = raw.best();
    let mut worst: f64 = 0.0;
    for y in &raw.actions[best] {
        let zb = &raw.arms[best] - y;
        for (xp, ys) in raw.arms.iter().zip(&raw.actions).enumerate().filter(|(i, _)| *i != best).map(|(_, p)| p) {
            let mut inner = f64::INFINITY;
            for yp in ys {
                let v = &zb - (xp - yp);
                let gap = v.dot(&raw.theta);
                if gap > 0.0 {
                    inner = inner.min(quad(&inv, &v) / (gap * gap));
                }
            }
            worst = worst.max(inner);
        }
    }
    worst
}

/// Minimum of `f` over the simplex grid `{w : w_i ∈ step·ℕ, Σ w = 1}` in `n ≤ 3` coordinates.
pub fn grid_min(n: usize, step_inverse: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let m = step_inverse;
    let h = 1.0 / m as f64;
    let mut best = (f64::INFINITY, vec![]);
    let mut consider = |w: Vec<f64>| {
        let v = f(&w);
        if v < best.0 {
            best = (v, w);
        }
    };
    match n {
        1 => consider(vec![1.0]),
        2 => (0..=m).for_each(|i| consider(vec![i as f64 * h, (m - i) as f64 * h])),
        3 => {
            for i in 0..=m {
                for j in 0..=m - i {
                    consider(vec![i as f64 * h, j as f64 * h, (m - i - j) as f64 * h]);
                }
            }
        }
        _ => panic!("grid search supports at most three coordinates"),
    }
    best
}

/// Standard best-arm identification complexity
/// `min_λ max_{x ≠ x*} ‖x* - x‖²_{A_λ⁻¹} / ((x* - x)ᵀθ)²` with `A_λ = Σ λ_x x xᵀ`,
/// by grid search over designs on at most three arms.
pub fn standard_bai_complexity(arms: &[DVector<f64>], theta: &DVector<f64>, step_inverse: usize) -> f64 {
    let means: Vec<f64> = arms.iter().map(|x| x.dot(theta)).collect();
    let best = (0..arms.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
    grid_min(arms.len(), step_inverse, |w| {
        let Some(inv) = inverse_gram(arms, w) else {
            return f64::INFINITY;
        };
        (0..arms.len())
            .filter(|&i| i != best)
            .map(|i| {
                let v = &arms[best] - &arms[i];
                quad(&inv, &v) / (means[best] - means[i]).powi(2)
            })
            .fold(0.0, f64::max)
    })
    .0
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian arms, actions at scale 0.3 and a Gaussian θ. `sizes[i]` is `|Y(x_i)|`.
/// Returns `None` if the draw fails instance validation.
pub fn random_instance(rng: &mut ChaCha8Rng, d: usize, sizes: &[usize]) -> Option<Instance> {
    let arms = sizes
        .iter()
        .enumerate()
        .map(|(id, _)| Arm { id, features: gaussian(rng, d, 1.0) })
        .collect();
    let adversaries = sizes
        .iter()
        .enumerate()
        .map(|(arm_id, &k)| AdversarySet { arm_id, actions: (0..k).map(|_| gaussian(rng, d, 0.3)).collect() })
        .collect();
    let theta = gaussian(rng, d, 1.0);
    Instance::new(d, arms, adversaries, theta, 1.0).ok()
}

/// Retries `random_instance` until a valid draw appears.
pub fn valid_random_instance(rng: &mut ChaCha8Rng, d: usize, sizes: &[usize]) -> Instance {
    assert!(sizes.iter().sum::<usize>() >= d, "{sizes:?} cannot span dimension {d}");
    (0..1000)
        .find_map(|_| random_instance(rng, d, sizes))
        .expect("no valid instance in 1000 draws")
}

/// Adversary-set sizes for `2..=max_arms` arms with `1..=max_y` actions each and
/// at least `d` difference vectors in total.
pub fn random_shape(rng: &mut ChaCha8Rng, d: usize, max_arms: usize, max_y: usize) -> Vec<usize> {
    loop {
        let n = rng.random_range(2..=max_arms);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_y)).collect();
        if sizes.iter().sum::<usize>() >= d {
            return sizes;
        }
    }
}
