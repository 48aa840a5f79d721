use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_positive_int, FiniteSumProblem};
use crate::error::Result;
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// `f_i(x) = 1/2 ||B_i x - c_i||^2` with square `B_i`.
///
/// The full gradient comes from the averaged normal equations
/// `H x - g`, `H = (1/m) sum B_i^T B_i`, `g = (1/m) sum B_i^T c_i`, not from
/// summing component gradients.
#[derive(Clone, Debug)]
pub struct FiniteSumQuadratic {
    d: usize,
    // row-major d x d blocks
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    hessian: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
    smoothness: f64,
}

impl FiniteSumQuadratic {
    fn residual(&self, i: usize, x: &DenseVector) -> Vec<f64> {
        let d = self.d;
        let b = &self.b[i];
        (0..d)
            .map(|r| {
                let row = &b[r * d..(r + 1) * d];
                row.iter().zip(x.iter()).map(|(a, xk)| a * xk).sum::<f64>() - self.c[i][r]
            })
            .collect()
    }
}

impl FiniteSumProblem for FiniteSumQuadratic {
    fn dim(&self) -> usize {
        self.d
    }

    fn num_components(&self) -> usize {
        self.b.len()
    }

    fn component_grad(&self, i: usize, x: &DenseVector) -> DenseVector {
        let d = self.d;
        let r = self.residual(i, x);
        let b = &self.b[i];
        DenseVector::from_fn(d, |k| (0..d).map(|row| b[row * d + k] * r[row]).sum())
    }

    fn full_grad(&self, x: &DenseVector) -> DenseVector {
        let d = self.d;
        DenseVector::from_fn(d, |k| {
            let row = &self.hessian[k * d..(k + 1) * d];
            row.iter().zip(x.iter()).map(|(h, xj)| h * xj).sum::<f64>() - self.linear[k]
        })
    }

    fn loss(&self, x: &DenseVector) -> f64 {
        // 1/2 x^T H x - g^T x + const
        let hx = self.full_grad(x);
        let quad: f64 = x
            .iter()
            .zip(hx.iter().zip(&self.linear))
            .map(|(xk, (hk, gk))| xk * (hk + gk))
            .sum();
        let lin: f64 = x.iter().zip(&self.linear).map(|(xk, gk)| xk * gk).sum();
        0.5 * quad - lin + self.constant
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}

/// Seeded least-squares finite sum with `m` square components of size `d`.
/// Entries of `B_i` are `N(0, 1/d)`, entries of `c_i` are `N(0, 1)`.
pub fn make_finite_sum_quadratic(d: usize, m: usize, seed: u64) -> Result<FiniteSumQuadratic> {
    check_positive_int("d", d)?;
    check_positive_int("m", m)?;
    let mut rng = RngStream::new(seed, "finite_sum_quadratic");
    let scale = 1.0 / (d as f64).sqrt();
    let mut b = Vec::with_capacity(m);
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        b.push(
            (0..d * d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>(),
        );
        c.push(
            (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>(),
        );
    }
    let mf = m as f64;
    let mut hessian = vec![0.0; d * d];
    let mut linear = vec![0.0; d];
    let mut constant = 0.0;
    let mut smoothness: f64 = 0.0;
    for (bi, ci) in b.iter().zip(&c) {
        for j in 0..d {
            for k in 0..d {
                let s: f64 = (0..d).map(|r| bi[r * d + j] * bi[r * d + k]).sum();
                hessian[j * d + k] += s / mf;
            }
            linear[j] += (0..d).map(|r| bi[r * d + j] * ci[r]).sum::<f64>() / mf;
        }
        constant += 0.5 * ci.iter().map(|v| v * v).sum::<f64>() / mf;
        // ||B_i||_2^2 <= ||B_i||_F^2
        smoothness = smoothness.max(bi.iter().map(|v| v * v).sum());
    }
    Ok(FiniteSumQuadratic {
        d,
        b,
        c,
        hessian,
        linear,
        constant,
        smoothness,
    })
}
