use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{est_error, guard_iterate, validate_stride, Observation, RunResult, Tracker};
use crate::oracles::FiniteSumProblem;
use crate::rng::RngStream;
use crate::sign::sign;
use crate::vector::DenseVector;

use super::{apply_sign_step, check_momentum, check_step, initial_point};

#[derive(Clone, Debug, PartialEq)]
pub struct SsvrFsConfig {
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
    /// Snapshot period `I`.
    pub snapshot_period: usize,
    pub seed: u64,
    pub x0: Option<DenseVector>,
    pub metrics_every: usize,
}

impl SsvrFsConfig {
    pub fn new(iterations: usize, eta: f64, beta: f64, snapshot_period: usize, seed: u64) -> Self {
        SsvrFsConfig {
            iterations,
            eta,
            beta,
            snapshot_period,
            seed,
            x0: None,
            metrics_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        if self.snapshot_period == 0 {
            return Err(Error::Config("snapshot period I must be >= 1".into()));
        }
        check_step(self.eta)?;
        check_momentum(self.beta)?;
        validate_stride(self.metrics_every)
    }
}

/// Snapshot point and its full gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub x: DenseVector,
    pub full_grad: DenseVector,
}

impl Snapshot {
    pub fn take(problem: &dyn FiniteSumProblem, x: &DenseVector) -> Self {
        Snapshot {
            x: x.clone(),
            full_grad: problem.full_grad(x),
        }
    }
}

/// Finite-sum recursive estimator with error correction:
///
/// `v_t = g_i(x_t) + (1 - beta) (v_{t-1} - g_i(x_{t-1})) - beta (g_i(x_snap) - grad f(x_snap))`
///
/// where `g_i` is the gradient of component `i_t`.
pub fn fs_estimator_update(
    v_prev: &DenseVector,
    x_t: &DenseVector,
    x_prev: &DenseVector,
    snapshot: &Snapshot,
    i_t: usize,
    problem: &dyn FiniteSumProblem,
    beta: f64,
) -> Result<DenseVector> {
    let d = problem.dim();
    for v in [v_prev, x_t, x_prev, &snapshot.x, &snapshot.full_grad] {
        v.ensure_dim(d)?;
    }
    let m = problem.num_components();
    if i_t >= m {
        return Err(Error::IndexOutOfRange { index: i_t, len: m });
    }
    check_momentum(beta)?;
    let g_now = problem.component_grad(i_t, x_t);
    let g_prev = problem.component_grad(i_t, x_prev);
    let g_snap = problem.component_grad(i_t, &snapshot.x);
    let keep = 1.0 - beta;
    Ok(DenseVector::from_fn(d, |k| {
        g_now[k] + keep * (v_prev[k] - g_prev[k]) - beta * (g_snap[k] - snapshot.full_grad[k])
    }))
}

/// Snapshot schedule: the first iteration and every `I` iterations after it.
pub(crate) fn is_snapshot_step(t: usize, period: usize) -> bool {
    (t - 1).is_multiple_of(period)
}

/// Sign descent on the finite-sum estimator with periodic full gradients.
pub fn ssvr_fs_run(problem: &dyn FiniteSumProblem, cfg: &SsvrFsConfig) -> Result<RunResult> {
    cfg.validate()?;
    let d = problem.dim();
    let m = problem.num_components();
    let root = RngStream::new(cfg.seed, "ssvr_fs");
    let mut indices = root.fork("indices");
    let mut tracker = Tracker::new(cfg.iterations, cfg.metrics_every, root.fork("select"));

    let x1 = initial_point(&cfg.x0, d)?;
    let mut x = x1.clone();
    let mut snapshot = Snapshot::take(problem, &x);
    let mut full_evals = 1;
    let mut sampled = 0;
    // full batch at t = 1
    let mut v = snapshot.full_grad.clone();
    let mut x_prev = x.clone();

    for t in 1..=cfg.iterations {
        if t > 1 {
            if is_snapshot_step(t, cfg.snapshot_period) {
                snapshot = Snapshot::take(problem, &x);
                full_evals += 1;
            }
            let i_t = indices.random_range(0..m);
            v = fs_estimator_update(&v, &x, &x_prev, &snapshot, i_t, problem, cfg.beta)?;
            sampled += 3;
        }
        let grad = problem.full_grad(&x);
        let (err_sq, err_inf) = est_error(&v, &grad);
        tracker.observe(Observation {
            t,
            x: &x,
            loss: problem.loss(&x),
            grad: &grad,
            est_err_sq: err_sq,
            est_err_linf: err_inf,
            bits_up: 0,
            bits_down: 0,
            envelope_ok: true,
        });
        let direction = sign(&v).map_err(|e| Error::Diverged {
            t,
            detail: format!("estimator not finite: {e}"),
        })?;
        x_prev = x.clone();
        apply_sign_step(&mut x, cfg.eta, direction.as_slice());
        guard_iterate(t, &x)?;
    }
    Ok(tracker.finish(x1, x, full_evals, sampled))
}
