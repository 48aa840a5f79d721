use crate::error::{Error, Result};
use crate::metrics::{est_error, guard_iterate, validate_stride, Observation, RunResult, Tracker};
use crate::oracles::StochasticGradOracle;
use crate::rng::RngStream;
use crate::sign::sign;
use crate::vector::DenseVector;

use super::{apply_sign_step, check_step, initial_point};

/// Shared configuration of signSGD, Signum and SGD.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub iterations: usize,
    pub eta: f64,
    pub batch: usize,
    /// Momentum `mu` of Signum: `m_t = mu m_{t-1} + (1 - mu) g_t`. Ignored
    /// by signSGD and SGD.
    pub momentum: f64,
    pub seed: u64,
    pub x0: Option<DenseVector>,
    pub metrics_every: usize,
}

impl BaselineConfig {
    pub fn new(iterations: usize, eta: f64, batch: usize, seed: u64) -> Self {
        BaselineConfig {
            iterations,
            eta,
            batch,
            momentum: 0.0,
            seed,
            x0: None,
            metrics_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        check_step(self.eta)?;
        validate_stride(self.metrics_every)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Update {
    Sign,
    Plain,
}

fn batch_grad(
    oracle: &dyn StochasticGradOracle,
    x: &DenseVector,
    batch: usize,
    rng: &mut RngStream,
) -> DenseVector {
    let mut g = DenseVector::zeros(x.dim());
    for _ in 0..batch {
        g.axpy(1.0, &oracle.grad_sample(x, rng));
    }
    g.scale(1.0 / batch as f64);
    g
}

fn run(
    oracle: &dyn StochasticGradOracle,
    cfg: &BaselineConfig,
    momentum: f64,
    update: Update,
    label: &str,
) -> Result<RunResult> {
    cfg.validate()?;
    let d = oracle.dim();
    let root = RngStream::new(cfg.seed, label);
    let mut samples = root.fork("samples");
    let mut tracker = Tracker::new(cfg.iterations, cfg.metrics_every, root.fork("select"));
    let x1 = initial_point(&cfg.x0, d)?;
    let mut x = x1.clone();
    let mut direction: Option<DenseVector> = None;

    for t in 1..=cfg.iterations {
        let g = batch_grad(oracle, &x, cfg.batch, &mut samples);
        let m = match direction.take() {
            Some(mut m) if momentum > 0.0 => {
                m.scale(momentum);
                m.axpy(1.0 - momentum, &g);
                m
            }
            _ => g,
        };
        let grad = oracle.grad_true(&x);
        let (err_sq, err_inf) = est_error(&m, &grad);
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
        match update {
            Update::Sign => {
                let s = sign(&m).map_err(|e| Error::Diverged {
                    t,
                    detail: format!("direction not finite: {e}"),
                })?;
                apply_sign_step(&mut x, cfg.eta, s.as_slice());
            }
            Update::Plain => x.axpy(-cfg.eta, &m),
        }
        guard_iterate(t, &x)?;
        direction = Some(m);
    }
    Ok(tracker.finish(x1, x, 0, cfg.iterations * cfg.batch))
}

/// `x_{t+1} = x_t - eta * sign(g_t)` with a mini-batch gradient `g_t`.
pub fn signsgd_run(oracle: &dyn StochasticGradOracle, cfg: &BaselineConfig) -> Result<RunResult> {
    run(oracle, cfg, 0.0, Update::Sign, "sign_descent")
}

/// signSGD on an exponential moving average of the gradients.
///
/// Shares its random stream layout with [`signsgd_run`], so zero momentum
/// reproduces it exactly.
pub fn signum_run(oracle: &dyn StochasticGradOracle, cfg: &BaselineConfig) -> Result<RunResult> {
    run(oracle, cfg, cfg.momentum, Update::Sign, "sign_descent")
}

pub fn sgd_run(oracle: &dyn StochasticGradOracle, cfg: &BaselineConfig) -> Result<RunResult> {
    run(oracle, cfg, 0.0, Update::Plain, "sgd")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{make_noisy_quadratic, NoiseModel, NoisyQuadratic};

    fn line() -> NoisyQuadratic {
        NoisyQuadratic::new(
            vec![1.0],
            DenseVector::new(vec![0.0]).unwrap(),
            0.0,
            NoiseModel::Gaussian,
        )
        .unwrap()
    }

    #[test]
    fn signsgd_moves_eta_then_oscillates() {
        let q = line();
        let mut cfg = BaselineConfig::new(60, 0.15, 1, 0);
        cfg.x0 = Some(DenseVector::new(vec![3.0]).unwrap());
        let r = signsgd_run(&q, &cfg).unwrap();
        let xs: Vec<f64> = r.rows.iter().map(|row| row.grad_l1).collect();
        // 3.0 / 0.15 = 20 steps to the minimizer
        for (t, &x) in xs.iter().enumerate().take(20) {
            assert!((x - (3.0 - 0.15 * t as f64)).abs() < 1e-12);
        }
        assert!(xs[20..].iter().all(|&x| x <= 0.15 + 1e-12));
    }

    #[test]
    fn signum_without_momentum_is_signsgd() {
        let q = make_noisy_quadratic(6, 5.0, 1.0, 3).unwrap();
        let cfg = BaselineConfig::new(200, 0.01, 2, 42);
        let a = signsgd_run(&q, &cfg).unwrap();
        let b = signum_run(&q, &cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.x_final, b.x_final);
    }

    #[test]
    fn signum_momentum_changes_trajectory() {
        let q = make_noisy_quadratic(6, 5.0, 1.0, 3).unwrap();
        let mut cfg = BaselineConfig::new(200, 0.01, 1, 42);
        cfg.momentum = 0.9;
        let a = signsgd_run(&q, &cfg).unwrap();
        let b = signum_run(&q, &cfg).unwrap();
        assert_ne!(a.x_final, b.x_final);
        assert!(b.summary.avg_est_err_sq < a.summary.avg_est_err_sq);
    }

    #[test]
    fn sgd_descends_monotonically_when_stable() {
        let q = make_noisy_quadratic(8, 10.0, 0.0, 4).unwrap();
        // L = 10, eta L = 1.5 < 2
        let r = sgd_run(&q, &BaselineConfig::new(100, 0.15, 1, 0)).unwrap();
        for w in r.rows.windows(2) {
            assert!(w[1].loss <= w[0].loss);
        }
        assert!(r.rows.last().unwrap().loss < 1e-10 * r.rows[0].loss.max(1.0));
    }
}
