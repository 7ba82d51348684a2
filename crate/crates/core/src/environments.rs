//! Synthetic instance generators and the Gaussian reward sampler.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{RbaiError, Result};
use crate::instance::{AdversarySet, Arm, DiffVector, Instance};

/// Identifier of the PRNG behind every seeded stream in this crate.
pub const PRNG_ID: &str = "rand_chacha::ChaCha8Rng/0.9";

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

/// Irrelevant-dimensions family.
///
/// Arms `x_i = e_i` for `i < d` plus `x_d = e_0 + sin(0.01) e_1`; `θ = 2 e_0`.
/// The first `d` arms have actions `0.01 j e_i` (`j = 1..=n_y`). The last arm
/// has actions `(0.01 j + 1 - cos 0.01) e_0`, which puts its robust value at
/// `2 cos(0.01) - 0.1`, just below the `1.90` of arm 0.
pub fn make_irrelevant_dims(d: usize, n_y: usize) -> Result<Instance> {
    if d < 2 {
        return Err(RbaiError::InvalidConfig(format!("irrelevant_dims needs d ≥ 2, got {d}")));
    }
    if n_y == 0 {
        return Err(RbaiError::InvalidConfig("n_y must be positive".into()));
    }
    let shift = 1.0 - 0.01f64.cos();
    let mut arms: Vec<Arm> = (0..d).map(|i| Arm { id: i, features: unit(d, i) }).collect();
    let mut last = unit(d, 0);
    last[1] = 0.01f64.sin();
    arms.push(Arm { id: d, features: last });

    let mut adversaries: Vec<AdversarySet> = (0..d)
        .map(|i| AdversarySet {
            arm_id: i,
            actions: (1..=n_y)
                .map(|j| unit(d, i).into_iter().map(|c| c * 0.01 * j as f64).collect())
                .collect(),
        })
        .collect();
    adversaries.push(AdversarySet {
        arm_id: d,
        actions: (1..=n_y)
            .map(|j| {
                let mut y = vec![0.0; d];
                y[0] = 0.01 * j as f64 + shift;
                y
            })
            .collect(),
    });

    let mut theta = vec![0.0; d];
    theta[0] = 2.0;
    Instance::new(d, arms, adversaries, theta, 1.0)
}

/// Point drawn uniformly from the unit sphere in `R^d` (normalized Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Unit-sphere family.
///
/// Samples `n_arms` points on `S^{d-1}`, takes the closest pair `(i, j)` with
/// `i < j`, sets `θ = x_i` and gives both arms the single action `-α x`. Every
/// other arm receives `n_y` actions drawn from the sphere and scaled by `α`.
/// Arm `i` is then the best robust arm with value `1 + α`.
pub fn make_unit_sphere(d: usize, n_arms: usize, n_y: usize, alpha: f64, seed: u64) -> Result<Instance> {
    if n_arms < 2 || d == 0 || n_y == 0 {
        return Err(RbaiError::InvalidConfig(format!(
            "unit_sphere needs d ≥ 1, n_arms ≥ 2, n_y ≥ 1 (got d={d}, n_arms={n_arms}, n_y={n_y})"
        )));
    }
    let mut rng = seeded_rng(seed);
    let xs: Vec<Vec<f64>> = (0..n_arms).map(|_| sample_sphere(&mut rng, d)).collect();

    let mut closest = (0, 1, f64::INFINITY);
    for i in 0..n_arms {
        for j in i + 1..n_arms {
            let dist: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < closest.2 {
                closest = (i, j, dist);
            }
        }
    }
    let (bi, bj, _) = closest;

    let adversaries = (0..n_arms)
        .map(|a| {
            let actions = if a == bi || a == bj {
                vec![xs[a].iter().map(|c| -alpha * c).collect()]
            } else {
                (0..n_y)
                    .map(|_| sample_sphere(&mut rng, d).into_iter().map(|c| alpha * c).collect())
                    .collect()
            };
            AdversarySet { arm_id: a, actions }
        })
        .collect();
    let theta = xs[bi].clone();
    let arms = xs
        .into_iter()
        .enumerate()
        .map(|(id, features)| Arm { id, features })
        .collect();
    Instance::new(d, arms, adversaries, theta, 1.0)
}

/// Draws `zᵀθ + η`, `η ~ N(0, noise_std²)`, from one seeded stream.
pub struct RewardSampler<'a> {
    instance: &'a Instance,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl<'a> RewardSampler<'a> {
    pub fn new(instance: &'a Instance, seed: u64) -> Self {
        let sd = instance.noise_std();
        RewardSampler {
            instance,
            rng: seeded_rng(seed),
            noise: (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite noise scale")),
        }
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    /// One noisy reward for a difference vector of this instance.
    pub fn pull(&mut self, z: &DiffVector) -> Result<f64> {
        let foreign = RbaiError::ForeignDiffVector {
            arm_id: z.arm_id,
            adv_index: z.adv_index,
        };
        if z.arm_id >= self.instance.n_arms()
            || z.adv_index >= self.instance.diffs_of(z.arm_id).len()
            || self.instance.z(z.arm_id, z.adv_index) != &z.z
        {
            return Err(foreign);
        }
        Ok(self.pull_index(self.instance.diff_index(z.arm_id, z.adv_index)))
    }

    /// One noisy reward for the difference vector at `index` in the enumeration.
    pub fn pull_index(&mut self, index: usize) -> f64 {
        let mean = self.mean(index);
        mean + self.draw_noise()
    }

    /// Sum of `count` consecutive rewards at `index`.
    pub fn pull_sum(&mut self, index: usize, count: u64) -> f64 {
        let mean = self.mean(index);
        let mut total = 0.0;
        for _ in 0..count {
            total += mean + self.draw_noise();
        }
        total
    }

    fn mean(&self, index: usize) -> f64 {
        self.instance.diff_set()[index].z.dot(self.instance.theta())
    }

    fn draw_noise(&mut self) -> f64 {
        match &self.noise {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        }
    }
}

/// Applies `rotation` (row-major `d × d`) to every arm, action and θ.
pub fn rotate_instance(instance: &Instance, rotation: &nalgebra::DMatrix<f64>) -> Result<Instance> {
    let apply = |v: &[f64]| -> Vec<f64> {
        (rotation * DVector::from_column_slice(v)).iter().copied().collect()
    };
    let arms = instance
        .arms()
        .iter()
        .map(|a| Arm { id: a.id, features: apply(&a.features) })
        .collect();
    let adversaries = instance
        .adversaries()
        .iter()
        .map(|s| AdversarySet {
            arm_id: s.arm_id,
            actions: s.actions.iter().map(|y| apply(y)).collect(),
        })
        .collect();
    let theta: Vec<f64> = apply(instance.theta().as_slice());
    Instance::new(instance.dim(), arms, adversaries, theta, instance.noise_std())
}
