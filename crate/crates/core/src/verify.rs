//! Brute-force reference computations used to check the optimizers.
//!
//! Nothing here calls into the code it checks: gradients come from central
//! differences of the loss, vote laws from exhaustive enumeration with their
//! own probability arithmetic, and the SVRG estimator is written out directly.

use crate::error::{Error, Result};
use crate::majority_vote::{MvOption, TieMode};
use crate::oracles::FiniteSumProblem;
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// Central-difference gradient `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn finite_diff_grad(
    loss: impl Fn(&DenseVector) -> f64,
    x: &DenseVector,
    h: f64,
) -> Result<DenseVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step h must be positive, got {h}"
        )));
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.dim());
    for k in 0..x.dim() {
        let orig = probe[k];
        probe[k] = orig + h;
        let up = loss(&probe);
        probe[k] = orig - h;
        let down = loss(&probe);
        probe[k] = orig;
        out.push((up - down) / (2.0 * h));
    }
    DenseVector::new(out)
}

/// Exact law of one broadcast coordinate: `[P(-1), P(0), P(+1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteDistribution {
    pub per_coord: Vec<[f64; 3]>,
}

impl VoteDistribution {
    pub fn p_minus(&self, k: usize) -> f64 {
        self.per_coord[k][0]
    }

    pub fn p_zero(&self, k: usize) -> f64 {
        self.per_coord[k][1]
    }

    pub fn p_plus(&self, k: usize) -> f64 {
        self.per_coord[k][2]
    }

    /// `E[broadcast_k]`
    pub fn mean(&self, k: usize) -> f64 {
        self.p_plus(k) - self.p_minus(k)
    }
}

pub const MAX_ENUMERATED_NODES: usize = 20;

/// Enumerates all `2^n` vote patterns per coordinate. `vote_probs[j][k]` is
/// the probability that node `j` votes +1 on coordinate `k`.
pub fn enumerate_vote_distribution(
    vote_probs: &[Vec<f64>],
    option: MvOption,
    tie_mode: TieMode,
) -> Result<VoteDistribution> {
    let n = vote_probs.len();
    if n == 0 || n > MAX_ENUMERATED_NODES {
        return Err(Error::InvalidInput(format!(
            "enumeration supports 1..={MAX_ENUMERATED_NODES} nodes, got {n}"
        )));
    }
    let d = vote_probs[0].len();
    if d == 0 || vote_probs.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidInput(
            "vote table rows must share a nonzero length".into(),
        ));
    }
    if vote_probs
        .iter()
        .flatten()
        .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::InvalidInput(
            "vote probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut per_coord = Vec::with_capacity(d);
    for k in 0..d {
        let mut law = [0.0f64; 3];
        for pattern in 0u32..(1u32 << n) {
            let mut weight = 1.0;
            let mut plus = 0i32;
            for (j, row) in vote_probs.iter().enumerate() {
                if pattern >> j & 1 == 1 {
                    weight *= row[k];
                    plus += 1;
                } else {
                    weight *= 1.0 - row[k];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let net = 2 * plus - n as i32;
            match option {
                MvOption::One => {
                    let slot = match net.cmp(&0) {
                        std::cmp::Ordering::Less => 0,
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => match tie_mode {
                            TieMode::Ternary => 1,
                            TieMode::PlusOne => 2,
                        },
                    };
                    law[slot] += weight;
                }
                MvOption::Two => {
                    // the server emits +1 with probability (1 + net/n) / 2 = plus / n
                    let up = plus as f64 / n as f64;
                    law[2] += weight * up;
                    law[0] += weight * (1.0 - up);
                }
            }
        }
        per_coord.push(law);
    }
    Ok(VoteDistribution { per_coord })
}

/// `grad f_i(x_t) - grad f_i(x_snap) + grad f(x_snap)` with the full gradient
/// formed by averaging all components here.
pub fn svrg_reference_estimator(
    problem: &dyn FiniteSumProblem,
    x_t: &DenseVector,
    snapshot_x: &DenseVector,
    i_t: usize,
) -> Result<DenseVector> {
    let m = problem.num_components();
    if i_t >= m {
        return Err(Error::IndexOutOfRange { index: i_t, len: m });
    }
    x_t.ensure_dim(problem.dim())?;
    snapshot_x.ensure_dim(problem.dim())?;
    let mut full = vec![0.0; problem.dim()];
    for i in 0..m {
        for (acc, g) in full
            .iter_mut()
            .zip(problem.component_grad(i, snapshot_x).iter())
        {
            *acc += g;
        }
    }
    let here = problem.component_grad(i_t, x_t);
    let there = problem.component_grad(i_t, snapshot_x);
    DenseVector::new(
        (0..problem.dim())
            .map(|k| here[k] - there[k] + full[k] / m as f64)
            .collect(),
    )
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Monte-Carlo mean and standard error of a vector-valued sampler.
pub fn mc_expectation(
    mut sampler: impl FnMut(&mut RngStream) -> DenseVector,
    n: usize,
    rng: &mut RngStream,
) -> Result<(DenseVector, DenseVector)> {
    if n < 2 {
        return Err(Error::InvalidInput("Monte-Carlo needs N >= 2".into()));
    }
    let first = sampler(rng);
    let d = first.dim();
    let mut columns: Vec<Vec<f64>> = (0..d).map(|k| vec![first[k]]).collect();
    for _ in 1..n {
        let s = sampler(rng);
        s.ensure_dim(d)?;
        for (col, v) in columns.iter_mut().zip(s.iter()) {
            col.push(*v);
        }
    }
    let nf = n as f64;
    let mut mean = Vec::with_capacity(d);
    let mut stderr = Vec::with_capacity(d);
    for col in &mut columns {
        let mu = pairwise_sum(col) / nf;
        for v in col.iter_mut() {
            *v = (*v - mu) * (*v - mu);
        }
        let var = pairwise_sum(col) / (nf - 1.0);
        mean.push(mu);
        stderr.push((var / nf).sqrt());
    }
    Ok((DenseVector::new(mean)?, DenseVector::new(stderr)?))
}
