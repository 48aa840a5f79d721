use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_nonneg, check_positive_int, Sample, StochasticGradOracle};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// Distribution of the additive gradient noise. Both have per-coordinate
/// variance `sigma^2 / d`, so the total variance is `sigma^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    Gaussian,
    /// Uniform on `[-a, a]` with `a = sigma * sqrt(3 / d)`; bounded per sample.
    Uniform,
}

/// `f(x) = 1/2 (x - x*)^T A (x - x*)` with diagonal `A` and additive noise.
#[derive(Clone, Debug)]
pub struct NoisyQuadratic {
    diag: Vec<f64>,
    minimizer: DenseVector,
    sigma: f64,
    noise: NoiseModel,
}

impl NoisyQuadratic {
    pub fn new(
        diag: Vec<f64>,
        minimizer: DenseVector,
        sigma: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        minimizer.ensure_dim(diag.len())?;
        if let Some(k) = diag.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "curvature {} at coordinate {k} must be positive",
                diag[k]
            )));
        }
        check_nonneg("sigma", sigma)?;
        Ok(NoisyQuadratic {
            diag,
            minimizer,
            sigma,
            noise,
        })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn minimizer(&self) -> &DenseVector {
        &self.minimizer
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.noise
    }

    /// Per-coordinate bound on a single noise draw, `None` when unbounded.
    pub fn noise_linf_bound(&self) -> Option<f64> {
        match self.noise {
            _ if self.sigma == 0.0 => Some(0.0),
            NoiseModel::Gaussian => None,
            NoiseModel::Uniform => Some(self.uniform_halfwidth()),
        }
    }

    fn uniform_halfwidth(&self) -> f64 {
        self.sigma * (3.0 / self.diag.len() as f64).sqrt()
    }

    pub fn max_curvature(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }
}

impl StochasticGradOracle for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn loss(&self, x: &DenseVector) -> f64 {
        0.5 * x
            .iter()
            .zip(self.minimizer.iter())
            .zip(&self.diag)
            .map(|((xi, mi), a)| a * (xi - mi) * (xi - mi))
            .sum::<f64>()
    }

    fn draw_sample(&self, rng: &mut RngStream) -> Sample {
        if self.sigma == 0.0 {
            return Sample::Exact;
        }
        let d = self.diag.len();
        let noise = match self.noise {
            NoiseModel::Gaussian => {
                let sd = self.sigma / (d as f64).sqrt();
                DenseVector::from_fn(d, |_| sd * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseModel::Uniform => {
                let a = self.uniform_halfwidth();
                DenseVector::from_fn(d, |_| rng.random_range(-a..=a))
            }
        };
        Sample::Noise(noise)
    }

    fn grad_at_sample(&self, x: &DenseVector, sample: &Sample) -> DenseVector {
        let mut g = self.grad_true(x);
        match sample {
            Sample::Exact => {}
            Sample::Noise(n) => g.axpy(1.0, n),
            Sample::Component(_) => panic!("quadratic oracle received a component sample"),
        }
        g
    }

    fn grad_true(&self, x: &DenseVector) -> DenseVector {
        DenseVector::from_fn(self.diag.len(), |k| {
            self.diag[k] * (x[k] - self.minimizer[k])
        })
    }

    fn noise_sigma(&self) -> Option<f64> {
        Some(self.sigma)
    }

    fn smoothness(&self) -> f64 {
        self.max_curvature()
    }
}

/// Log-spaced curvatures in `[1, condition_number]`.
pub(crate) fn log_spaced(d: usize, condition_number: f64) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d)
        .map(|k| condition_number.powf(k as f64 / (d - 1) as f64))
        .collect()
}

/// Noisy quadratic with log-spaced curvatures in `[1, condition_number]` and a
/// standard-normal minimizer drawn from `seed`.
pub fn make_noisy_quadratic(
    d: usize,
    condition_number: f64,
    sigma: f64,
    seed: u64,
) -> Result<NoisyQuadratic> {
    make_noisy_quadratic_with(d, condition_number, sigma, NoiseModel::Gaussian, seed)
}

pub fn make_noisy_quadratic_with(
    d: usize,
    condition_number: f64,
    sigma: f64,
    noise: NoiseModel,
    seed: u64,
) -> Result<NoisyQuadratic> {
    check_positive_int("d", d)?;
    if !(condition_number >= 1.0 && condition_number.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "condition number must be >= 1, got {condition_number}"
        )));
    }
    let mut rng = RngStream::new(seed, "noisy_quadratic/minimizer");
    let minimizer = DenseVector::from_fn(d, |_| rng.sample(StandardNormal));
    NoisyQuadratic::new(log_spaced(d, condition_number), minimizer, sigma, noise)
}
