//! Objective functions with sampled, component and exact gradient access.
//!
//! Every constructor here produces a problem whose smoothness constant,
//! noise level and (for node partitions) gradient bound are known by
//! construction, so the optimizers can be checked against them.

mod finite_sum;
mod logistic;
mod partition;
mod quadratic;

pub use finite_sum::{make_finite_sum_quadratic, FiniteSumQuadratic};
pub use logistic::{make_nonconvex_logistic, NonconvexLogistic};
pub use partition::{partition_heterogeneous, sign_conflict_pair, NodePartition, PartitionSpec};
pub use quadratic::{make_noisy_quadratic, make_noisy_quadratic_with, NoiseModel, NoisyQuadratic};

use rand::Rng;

use crate::rng::RngStream;
use crate::vector::DenseVector;

/// One draw of the sampling variable.
///
/// Gradients at two different points evaluated with the same `Sample` use the
/// same randomness, which is what the recursive estimators require.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    /// Deterministic oracle.
    Exact,
    /// Index of a finite-sum component.
    Component(usize),
    /// Additive gradient noise.
    Noise(DenseVector),
}

/// Stochastic first-order access to `f(x) = E[f(x; xi)]`.
pub trait StochasticGradOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, x: &DenseVector) -> f64;

    fn draw_sample(&self, rng: &mut RngStream) -> Sample;

    fn grad_at_sample(&self, x: &DenseVector, sample: &Sample) -> DenseVector;

    /// One draw of `grad f(x; xi)`.
    fn grad_sample(&self, x: &DenseVector, rng: &mut RngStream) -> DenseVector {
        let s = self.draw_sample(rng);
        self.grad_at_sample(x, &s)
    }

    /// Exact gradient. Instrumentation only; the algorithms never call it.
    fn grad_true(&self, x: &DenseVector) -> DenseVector;

    /// Certified bound on `sqrt(E||grad f(x; xi) - grad f(x)||^2)`, if known.
    fn noise_sigma(&self) -> Option<f64>;

    fn smoothness(&self) -> f64;
}

/// `f(x) = (1/m) sum_i f_i(x)` with per-component gradients.
pub trait FiniteSumProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn num_components(&self) -> usize;

    /// Gradient of component `i`. Panics if `i >= num_components()`.
    fn component_grad(&self, i: usize, x: &DenseVector) -> DenseVector;

    fn full_grad(&self, x: &DenseVector) -> DenseVector;

    fn loss(&self, x: &DenseVector) -> f64;

    /// Upper bound on the Lipschitz constant of every component gradient.
    fn smoothness(&self) -> f64;
}

/// Views a finite sum as a stochastic problem with `xi` uniform over
/// components.
pub struct AsStochastic<'a>(pub &'a dyn FiniteSumProblem);

impl StochasticGradOracle for AsStochastic<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn loss(&self, x: &DenseVector) -> f64 {
        self.0.loss(x)
    }

    fn draw_sample(&self, rng: &mut RngStream) -> Sample {
        Sample::Component(rng.random_range(0..self.0.num_components()))
    }

    fn grad_at_sample(&self, x: &DenseVector, sample: &Sample) -> DenseVector {
        match sample {
            Sample::Component(i) => self.0.component_grad(*i, x),
            Sample::Exact => self.0.full_grad(x),
            Sample::Noise(_) => panic!("finite-sum oracle received a noise sample"),
        }
    }

    fn grad_true(&self, x: &DenseVector) -> DenseVector {
        self.0.full_grad(x)
    }

    fn noise_sigma(&self) -> Option<f64> {
        None
    }

    fn smoothness(&self) -> f64 {
        self.0.smoothness()
    }
}

fn check_positive_int(name: &str, v: usize) -> crate::Result<()> {
    if v == 0 {
        return Err(crate::Error::InvalidInput(format!("{name} must be >= 1")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> crate::Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(crate::Error::InvalidInput(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}
