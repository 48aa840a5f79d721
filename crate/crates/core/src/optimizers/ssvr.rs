use crate::error::{Error, Result};
use crate::metrics::{est_error, guard_iterate, validate_stride, Observation, RunResult, Tracker};
use crate::oracles::StochasticGradOracle;
use crate::rng::RngStream;
use crate::sign::sign;
use crate::vector::DenseVector;

use super::{apply_sign_step, check_momentum, check_step, initial_point};

#[derive(Clone, Debug, PartialEq)]
pub struct SsvrConfig {
    /// `T`
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
    /// Batch for the first estimator, `B0`.
    pub batch0: usize,
    /// Batch for every later step, `B1`.
    pub batch1: usize,
    pub seed: u64,
    /// Starting point; the origin when absent.
    pub x0: Option<DenseVector>,
    pub metrics_every: usize,
}

impl SsvrConfig {
    pub fn new(
        iterations: usize,
        eta: f64,
        beta: f64,
        batch0: usize,
        batch1: usize,
        seed: u64,
    ) -> Self {
        SsvrConfig {
            iterations,
            eta,
            beta,
            batch0,
            batch1,
            seed,
            x0: None,
            metrics_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        check_step(self.eta)?;
        check_momentum(self.beta)?;
        if self.batch0 == 0 || self.batch1 == 0 {
            return Err(Error::Config("batch sizes B0, B1 must be >= 1".into()));
        }
        validate_stride(self.metrics_every)
    }
}

/// Recursive-momentum estimator state: `v_t` and the point it was formed at.
#[derive(Clone, Debug, PartialEq)]
pub struct StormState {
    pub v: DenseVector,
    pub x_prev: DenseVector,
    pub t: usize,
}

impl StormState {
    /// `v_1 = (1/B0) sum_k grad f(x_1; xi_k)`.
    pub fn init(
        oracle: &dyn StochasticGradOracle,
        x1: &DenseVector,
        batch0: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        x1.ensure_dim(oracle.dim())?;
        if batch0 == 0 {
            return Err(Error::Config("B0 must be >= 1".into()));
        }
        let mut v = DenseVector::zeros(x1.dim());
        for _ in 0..batch0 {
            v.axpy(1.0, &oracle.grad_sample(x1, rng));
        }
        v.scale(1.0 / batch0 as f64);
        Ok(StormState {
            v,
            x_prev: x1.clone(),
            t: 1,
        })
    }
}

/// One step of
/// `v_t = g_B(x_t) + (1 - beta) (v_{t-1} - g_B(x_{t-1}))`
/// where both batch means reuse the same `B1` samples.
pub fn storm_update(
    state: &StormState,
    x_new: &DenseVector,
    oracle: &dyn StochasticGradOracle,
    batch: usize,
    beta: f64,
    rng: &mut RngStream,
) -> Result<StormState> {
    let d = oracle.dim();
    state.v.ensure_dim(d)?;
    state.x_prev.ensure_dim(d)?;
    x_new.ensure_dim(d)?;
    if batch == 0 {
        return Err(Error::Config("B1 must be >= 1".into()));
    }
    check_momentum(beta)?;
    let mut g_new = DenseVector::zeros(d);
    let mut g_old = DenseVector::zeros(d);
    for _ in 0..batch {
        let sample = oracle.draw_sample(rng);
        g_new.axpy(1.0, &oracle.grad_at_sample(x_new, &sample));
        g_old.axpy(1.0, &oracle.grad_at_sample(&state.x_prev, &sample));
    }
    let inv = 1.0 / batch as f64;
    let keep = 1.0 - beta;
    let v = DenseVector::from_fn(d, |k| inv * g_new[k] + keep * (state.v[k] - inv * g_old[k]));
    Ok(StormState {
        v,
        x_prev: x_new.clone(),
        t: state.t + 1,
    })
}

/// Sign descent driven by the recursive-momentum estimator.
pub fn ssvr_run(oracle: &dyn StochasticGradOracle, cfg: &SsvrConfig) -> Result<RunResult> {
    cfg.validate()?;
    let d = oracle.dim();
    let root = RngStream::new(cfg.seed, "ssvr");
    let mut samples = root.fork("samples");
    let mut tracker = Tracker::new(cfg.iterations, cfg.metrics_every, root.fork("select"));

    let x1 = initial_point(&cfg.x0, d)?;
    let mut x = x1.clone();
    let mut state = StormState::init(oracle, &x, cfg.batch0, &mut samples)?;
    let mut sampled = cfg.batch0;

    for t in 1..=cfg.iterations {
        if t > 1 {
            state = storm_update(&state, &x, oracle, cfg.batch1, cfg.beta, &mut samples)?;
            sampled += 2 * cfg.batch1;
        }
        let grad = oracle.grad_true(&x);
        let (err_sq, err_inf) = est_error(&state.v, &grad);
        tracker.observe(Observation {
            t,
            x: &x,
            loss: oracle.loss(&x),
            grad: &grad,
            est_err_sq: err_sq,
            est_err_linf: err_inf,
            bits_up: 0,
            bits_down: 0,
            envelope_ok: true,
        });
        let direction = sign(&state.v).map_err(|e| Error::Diverged {
            t,
            detail: format!("estimator not finite: {e}"),
        })?;
        apply_sign_step(&mut x, cfg.eta, direction.as_slice());
        guard_iterate(t, &x)?;
    }
    Ok(tracker.finish(x1, x, 0, sampled))
}
