use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_nonneg, check_positive_int, FiniteSumProblem};
use crate::error::Result;
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// Binary logistic loss with the nonconvex penalty
/// `lambda * sum_k x_k^2 / (1 + x_k^2)`.
///
/// `f_i(x) = log(1 + exp(-y_i a_i^T x)) + lambda * sum_k x_k^2 / (1 + x_k^2)`.
#[derive(Clone, Debug)]
pub struct NonconvexLogistic {
    d: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    reg_lambda: f64,
    smoothness: f64,
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NonconvexLogistic {
    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn reg_lambda(&self) -> f64 {
        self.reg_lambda
    }

    fn margin(&self, i: usize, x: &DenseVector) -> f64 {
        self.labels[i]
            * self.features[i]
                .iter()
                .zip(x.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    fn add_reg_grad(&self, x: &DenseVector, out: &mut DenseVector) {
        if self.reg_lambda == 0.0 {
            return;
        }
        for (o, &xk) in out.as_mut_slice().iter_mut().zip(x.iter()) {
            let q = 1.0 + xk * xk;
            *o += self.reg_lambda * 2.0 * xk / (q * q);
        }
    }

    fn reg_loss(&self, x: &DenseVector) -> f64 {
        self.reg_lambda * x.iter().map(|xk| xk * xk / (1.0 + xk * xk)).sum::<f64>()
    }
}

impl FiniteSumProblem for NonconvexLogistic {
    fn dim(&self) -> usize {
        self.d
    }

    fn num_components(&self) -> usize {
        self.labels.len()
    }

    fn component_grad(&self, i: usize, x: &DenseVector) -> DenseVector {
        // d/dz log(1 + e^{-z}) = -sigmoid(-z)
        let w = -self.labels[i] * sigmoid(-self.margin(i, x));
        let mut g = DenseVector::from_fn(self.d, |k| w * self.features[i][k]);
        self.add_reg_grad(x, &mut g);
        g
    }

    fn full_grad(&self, x: &DenseVector) -> DenseVector {
        let m = self.labels.len() as f64;
        let mut g = DenseVector::zeros(self.d);
        let gs = g.as_mut_slice();
        for i in 0..self.labels.len() {
            let w = -self.labels[i] * sigmoid(-self.margin(i, x)) / m;
            for (gk, a) in gs.iter_mut().zip(&self.features[i]) {
                *gk += w * a;
            }
        }
        self.add_reg_grad(x, &mut g);
        g
    }

    fn loss(&self, x: &DenseVector) -> f64 {
        let m = self.labels.len() as f64;
        let data: f64 = (0..self.labels.len())
            .map(|i| softplus(-self.margin(i, x)))
            .sum::<f64>()
            / m;
        data + self.reg_loss(x)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}

/// Synthetic classification data: features `N(0, 1)`, labels from a seeded
/// planted direction with 10% label flips.
pub fn make_nonconvex_logistic(
    d: usize,
    n_samples: usize,
    reg_lambda: f64,
    seed: u64,
) -> Result<NonconvexLogistic> {
    check_positive_int("d", d)?;
    check_positive_int("n_samples", n_samples)?;
    check_nonneg("reg_lambda", reg_lambda)?;
    let mut rng = RngStream::new(seed, "nonconvex_logistic");
    let planted: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    let mut max_sq: f64 = 0.0;
    for _ in 0..n_samples {
        let a: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let score: f64 = a.iter().zip(&planted).map(|(u, v)| u * v).sum();
        let mut y = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            y = -y;
        }
        max_sq = max_sq.max(a.iter().map(|v| v * v).sum());
        features.push(a);
        labels.push(y);
    }
    // logistic curvature <= ||a_i||^2 / 4; |d^2/dx^2 x^2/(1+x^2)| <= 2
    let smoothness = max_sq / 4.0 + 2.0 * reg_lambda;
    Ok(NonconvexLogistic {
        d,
        features,
        labels,
        reg_lambda,
        smoothness,
    })
}
