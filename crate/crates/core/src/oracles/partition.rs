use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quadratic::log_spaced;
use super::{check_nonneg, check_positive_int, NoiseModel, NoisyQuadratic, StochasticGradOracle};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// Parameters shared by every node of a heterogeneous quadratic partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub d: usize,
    #[serde(default = "one")]
    pub condition_number: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Radius of the ball around the global minimizer on which the gradient
    /// bounds are certified.
    #[serde(default = "default_envelope")]
    pub envelope_radius: f64,
}

fn one() -> f64 {
    1.0
}

fn default_envelope() -> f64 {
    2.0
}

impl PartitionSpec {
    pub fn new(d: usize) -> Self {
        PartitionSpec {
            d,
            condition_number: 1.0,
            sigma: 0.0,
            noise: NoiseModel::Gaussian,
            envelope_radius: default_envelope(),
        }
    }
}

/// `n` node objectives `f_j(x) = 1/2 (x - x*_j)^T A (x - x*_j)` sharing `A`.
///
/// Gradient bounds are certified on the ball of radius `envelope_radius`
/// around the global minimizer (the mean of the node minimizers).
#[derive(Clone, Debug)]
pub struct NodePartition {
    nodes: Vec<NoisyQuadratic>,
    center: DenseVector,
    envelope_radius: f64,
    bound_l2: f64,
    bound_linf_sample: Option<f64>,
}

impl NodePartition {
    /// Builds a partition from explicit node minimizers.
    pub fn from_minimizers(
        diag: Vec<f64>,
        minimizers: Vec<DenseVector>,
        sigma: f64,
        noise: NoiseModel,
        envelope_radius: f64,
    ) -> Result<Self> {
        if minimizers.is_empty() {
            return Err(Error::InvalidInput(
                "partition needs at least one node".into(),
            ));
        }
        if !(envelope_radius > 0.0 && envelope_radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "envelope radius must be positive, got {envelope_radius}"
            )));
        }
        let d = diag.len();
        let n = minimizers.len() as f64;
        let mut center = DenseVector::zeros(d);
        for m in &minimizers {
            m.ensure_dim(d)?;
            center.axpy(1.0 / n, m);
        }
        let nodes = minimizers
            .into_iter()
            .map(|m| NoisyQuadratic::new(diag.clone(), m, sigma, noise))
            .collect::<Result<Vec<_>>>()?;
        let lmax = nodes[0].max_curvature();
        let mut bound_l2: f64 = 0.0;
        let mut bound_linf: f64 = 0.0;
        for node in &nodes {
            let off = node.minimizer().sub(&center);
            bound_l2 = bound_l2.max(lmax * (envelope_radius + off.norm_l2()));
            bound_linf = bound_linf.max(lmax * (envelope_radius + off.norm_linf()));
        }
        let bound_linf_sample = nodes[0].noise_linf_bound().map(|b| bound_linf + b);
        Ok(NodePartition {
            nodes,
            center,
            envelope_radius,
            bound_l2,
            bound_linf_sample,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn node(&self, j: usize) -> &NoisyQuadratic {
        &self.nodes[j]
    }

    pub fn node_oracle(&self, j: usize) -> &dyn StochasticGradOracle {
        &self.nodes[j]
    }

    /// Global minimizer; also the center of the certified envelope.
    pub fn center(&self) -> &DenseVector {
        &self.center
    }

    pub fn envelope_radius(&self) -> f64 {
        self.envelope_radius
    }

    pub fn in_envelope(&self, x: &DenseVector) -> bool {
        x.dist_sq(&self.center).sqrt() <= self.envelope_radius
    }

    /// `G` with `||grad f_j(x)||_2 <= G` on the envelope, for every node.
    pub fn bound_g_l2(&self) -> f64 {
        self.bound_l2
    }

    /// `G` with `||grad f_j(x; xi)||_inf <= G` on the envelope for every
    /// sample; `None` when the noise is unbounded.
    pub fn bound_g_linf_sample(&self) -> Option<f64> {
        self.bound_linf_sample
    }

    pub fn global_loss(&self, x: &DenseVector) -> f64 {
        self.nodes.iter().map(|f| f.loss(x)).sum::<f64>() / self.nodes.len() as f64
    }

    /// `(1/n) sum_j grad f_j(x)`.
    pub fn global_grad_true(&self, x: &DenseVector) -> DenseVector {
        let n = self.nodes.len() as f64;
        let mut g = DenseVector::zeros(self.dim());
        for f in &self.nodes {
            g.axpy(1.0 / n, &f.grad_true(x));
        }
        g
    }
}

/// `n` nodes whose minimizers spread around a seeded global minimizer by an
/// amount proportional to `heterogeneity`. Zero heterogeneity gives identical
/// nodes.
pub fn partition_heterogeneous(
    spec: &PartitionSpec,
    n: usize,
    heterogeneity: f64,
    seed: u64,
) -> Result<NodePartition> {
    check_positive_int("d", spec.d)?;
    check_positive_int("n", n)?;
    check_nonneg("heterogeneity", heterogeneity)?;
    if !(spec.condition_number >= 1.0 && spec.condition_number.is_finite()) {
        return Err(Error::InvalidInput("condition number must be >= 1".into()));
    }
    let d = spec.d;
    let mut rng = RngStream::new(seed, "partition/center");
    let center = DenseVector::from_fn(d, |_| rng.sample(StandardNormal));
    let mut offsets: Vec<DenseVector> = (0..n)
        .map(|j| {
            let mut r = RngStream::new(seed, "partition/offset").fork_index(j as u64);
            DenseVector::from_fn(d, |_| {
                r.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()
            })
        })
        .collect();
    let mut mean = DenseVector::zeros(d);
    for o in &offsets {
        mean.axpy(1.0 / n as f64, o);
    }
    let minimizers = offsets
        .iter_mut()
        .map(|o| {
            let mut m = center.clone();
            if heterogeneity > 0.0 {
                m.axpy(heterogeneity, &o.sub(&mean));
            }
            m
        })
        .collect();
    NodePartition::from_minimizers(
        log_spaced(d, spec.condition_number),
        minimizers,
        spec.sigma,
        spec.noise,
        spec.envelope_radius,
    )
}

/// Two noiseless nodes with `A = I` and minimizers `+e_1` and `-e_1`. The
/// global minimizer is the origin, where the node gradients are `-e_1` and
/// `+e_1` and their signs disagree on the first coordinate.
pub fn sign_conflict_pair(d: usize, envelope_radius: f64) -> Result<NodePartition> {
    check_positive_int("d", d)?;
    NodePartition::from_minimizers(
        vec![1.0; d],
        vec![
            DenseVector::basis(d, 0, 1.0),
            DenseVector::basis(d, 0, -1.0),
        ],
        0.0,
        NoiseModel::Gaussian,
        envelope_radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_limit_has_identical_nodes() {
        let mut spec = PartitionSpec::new(5);
        spec.condition_number = 4.0;
        let p = partition_heterogeneous(&spec, 6, 0.0, 3).unwrap();
        let mut rng = RngStream::new(1, "x");
        for _ in 0..50 {
            let x = DenseVector::from_fn(5, |_| rng.random_range(-3.0..3.0));
            let g0 = p.node(0).grad_true(&x);
            for j in 1..6 {
                assert_eq!(p.node(j).grad_true(&x), g0);
            }
        }
    }

    #[test]
    fn global_gradient_is_node_mean() {
        let spec = PartitionSpec::new(4);
        let p = partition_heterogeneous(&spec, 5, 1.5, 7).unwrap();
        let mut rng = RngStream::new(2, "x");
        for _ in 0..20 {
            let x = DenseVector::from_fn(4, |_| rng.random_range(-3.0..3.0));
            let mut mean = DenseVector::zeros(4);
            for j in 0..5 {
                mean.axpy(0.2, &p.node(j).grad_true(&x));
            }
            assert!(mean.max_abs_diff(&p.global_grad_true(&x)) <= 1e-12);
        }
        assert!(p.global_grad_true(p.center()).norm_linf() < 1e-12);
    }

    #[test]
    fn conflict_instance() {
        let p = sign_conflict_pair(3, 1.0).unwrap();
        let origin = DenseVector::zeros(3);
        assert_eq!(p.global_grad_true(&origin).norm_linf(), 0.0);
        assert_eq!(p.node(0).grad_true(&origin).as_slice(), &[-1.0, 0.0, 0.0]);
        assert_eq!(p.node(1).grad_true(&origin).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(p.bound_g_l2(), 2.0);
        assert_eq!(p.bound_g_linf_sample(), Some(2.0));
    }

    #[test]
    fn certified_bounds_hold_on_envelope() {
        let spec = PartitionSpec {
            d: 6,
            condition_number: 3.0,
            sigma: 0.5,
            noise: NoiseModel::Uniform,
            envelope_radius: 1.5,
        };
        let p = partition_heterogeneous(&spec, 4, 2.0, 11).unwrap();
        let g2 = p.bound_g_l2();
        let ginf = p.bound_g_linf_sample().unwrap();
        let mut rng = RngStream::new(3, "env");
        for _ in 0..2000 {
            let mut dir = DenseVector::from_fn(6, |_| rng.sample(StandardNormal));
            dir.scale(spec.envelope_radius * rng.random::<f64>() / dir.norm_l2());
            let x = p.center().add(&dir);
            assert!(p.in_envelope(&x));
            for j in 0..4 {
                assert!(p.node(j).grad_true(&x).norm_l2() <= g2);
                assert!(p.node(j).grad_sample(&x, &mut rng).norm_linf() <= ginf);
            }
        }
    }

    #[test]
    fn gaussian_noise_has_no_sample_bound() {
        let mut spec = PartitionSpec::new(2);
        spec.sigma = 1.0;
        let p = partition_heterogeneous(&spec, 2, 1.0, 0).unwrap();
        assert!(p.bound_g_linf_sample().is_none());
    }
}
