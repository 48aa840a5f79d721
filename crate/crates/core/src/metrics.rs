//! Per-iteration metrics and run results shared by every algorithm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majority_vote::CommLedger;
use crate::rng::RngStream;
use crate::vector::DenseVector;

/// One CSV record. Metrics describe the iterate `x_t` and the estimator `v_t`
/// used to leave it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: u64,
    pub loss: f64,
    /// `||grad f(x_t)||_1`
    pub grad_l1: f64,
    /// `||grad f(x_t)||_2`
    pub grad_l2: f64,
    /// `||v_t - grad f(x_t)||_2^2`, averaged over nodes in the distributed runs.
    pub est_err_sq: f64,
    pub bits_up: u64,
    pub bits_down: u64,
    pub envelope_ok: bool,
}

/// Aggregates over all `T` iterations, independent of the row stride.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    /// `(1/T) sum_t ||grad f(x_t)||_1`
    pub avg_grad_l1: f64,
    pub avg_grad_l2: f64,
    pub avg_est_err_sq: f64,
    /// `max_t ||v_t - grad f(x_t)||_inf`
    pub max_est_err_linf: f64,
    pub final_grad_l2: f64,
    /// Full-gradient evaluations performed by the algorithm itself.
    pub full_grad_evals: usize,
    /// Stochastic or component gradient evaluations.
    pub sample_grad_evals: usize,
    /// Iterations whose iterate was outside the certified envelope.
    pub envelope_exits: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Rows at `t = k * metrics_every`.
    pub rows: Vec<MetricsRow>,
    /// Uniformly selected iterate `x_tau`.
    pub x_out: DenseVector,
    /// Selected index in `1..=T` (0 only for an empty distributed run).
    pub tau_out: usize,
    /// `x_{T+1}`, the iterate after the last update.
    pub x_final: DenseVector,
    pub summary: RunSummary,
    pub ledger: Option<CommLedger>,
}

pub(crate) struct Observation<'a> {
    pub t: usize,
    pub x: &'a DenseVector,
    pub loss: f64,
    pub grad: &'a DenseVector,
    pub est_err_sq: f64,
    pub est_err_linf: f64,
    pub bits_up: u64,
    pub bits_down: u64,
    pub envelope_ok: bool,
}

pub(crate) struct Tracker {
    every: usize,
    tau: usize,
    x_out: Option<DenseVector>,
    rows: Vec<MetricsRow>,
    summary: RunSummary,
    sum_l1: f64,
    sum_l2: f64,
    sum_err: f64,
}

pub(crate) fn validate_stride(every: usize) -> Result<()> {
    if every == 0 {
        return Err(Error::Config("metrics_every must be >= 1".into()));
    }
    Ok(())
}

impl Tracker {
    /// The output index is drawn up front from its own stream so it does not
    /// depend on, or perturb, the trajectory.
    pub fn new(iterations: usize, every: usize, mut select: RngStream) -> Self {
        let tau = if iterations == 0 {
            0
        } else {
            select.random_range(1..=iterations)
        };
        Tracker {
            every,
            tau,
            x_out: None,
            rows: Vec::with_capacity(iterations / every.max(1) + 1),
            summary: RunSummary {
                iterations,
                ..RunSummary::default()
            },
            sum_l1: 0.0,
            sum_l2: 0.0,
            sum_err: 0.0,
        }
    }

    pub fn observe(&mut self, obs: Observation<'_>) {
        let grad_l1 = obs.grad.norm_l1();
        let grad_l2 = obs.grad.norm_l2();
        self.sum_l1 += grad_l1;
        self.sum_l2 += grad_l2;
        self.sum_err += obs.est_err_sq;
        self.summary.max_est_err_linf = self.summary.max_est_err_linf.max(obs.est_err_linf);
        self.summary.final_grad_l2 = grad_l2;
        if !obs.envelope_ok {
            self.summary.envelope_exits += 1;
        }
        if obs.t == self.tau {
            self.x_out = Some(obs.x.clone());
        }
        if obs.t.is_multiple_of(self.every) {
            self.rows.push(MetricsRow {
                t: obs.t as u64,
                loss: obs.loss,
                grad_l1,
                grad_l2,
                est_err_sq: obs.est_err_sq,
                bits_up: obs.bits_up,
                bits_down: obs.bits_down,
                envelope_ok: obs.envelope_ok,
            });
        }
    }

    pub fn finish(
        mut self,
        x_first: DenseVector,
        x_final: DenseVector,
        full: usize,
        sampled: usize,
    ) -> RunResult {
        let n = self.summary.iterations.max(1) as f64;
        self.summary.avg_grad_l1 = self.sum_l1 / n;
        self.summary.avg_grad_l2 = self.sum_l2 / n;
        self.summary.avg_est_err_sq = self.sum_err / n;
        self.summary.full_grad_evals = full;
        self.summary.sample_grad_evals = sampled;
        RunResult {
            rows: self.rows,
            x_out: self.x_out.unwrap_or(x_first),
            tau_out: self.tau,
            x_final,
            summary: self.summary,
            ledger: None,
        }
    }
}

/// Iterates beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

pub(crate) fn guard_iterate(t: usize, x: &DenseVector) -> Result<()> {
    if let Some(k) = x
        .iter()
        .position(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
    {
        return Err(Error::Diverged {
            t,
            detail: format!("coordinate {k} of x_{{t+1}} is {}", x[k]),
        });
    }
    Ok(())
}

pub(crate) fn est_error(v: &DenseVector, grad: &DenseVector) -> (f64, f64) {
    let diff = v.sub(grad);
    let l2 = diff.norm_l2();
    (l2 * l2, diff.norm_linf())
}
