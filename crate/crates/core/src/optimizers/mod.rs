//! Centralized sign-based optimizers.
//!
//! * [`ssvr_run`]: sign descent on the recursive-momentum (STORM) estimator,
//!   with a `B0` batch at the first iteration and `B1` afterwards.
//! * [`ssvr_fs_run`]: the finite-sum variant, which adds a periodic
//!   full-gradient snapshot and an error-correction term to the recursion.
//! * [`signsgd_run`], [`signum_run`], [`sgd_run`]: baselines.
//!
//! Every run records the same [`MetricsRow`](crate::metrics::MetricsRow)
//! schema. The true gradient is evaluated for metrics only.

mod baselines;
mod presets;
mod ssvr;
mod ssvr_fs;

pub use baselines::{sgd_run, signsgd_run, signum_run, BaselineConfig};
pub use presets::{preset, Preset, PresetName, ScaleConstants};
pub use ssvr::{ssvr_run, storm_update, SsvrConfig, StormState};
pub use ssvr_fs::{fs_estimator_update, ssvr_fs_run, Snapshot, SsvrFsConfig};

use crate::error::{Error, Result};
use crate::vector::DenseVector;

pub(crate) fn initial_point(x0: &Option<DenseVector>, dim: usize) -> Result<DenseVector> {
    match x0 {
        Some(x) => {
            x.ensure_dim(dim)?;
            x.ensure_finite()?;
            Ok(x.clone())
        }
        None => Ok(DenseVector::zeros(dim)),
    }
}

pub(crate) fn check_step(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

pub(crate) fn check_momentum(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    Ok(())
}

/// `x -= eta * s` for a ternary direction.
pub(crate) fn apply_sign_step(x: &mut DenseVector, eta: f64, direction: &[i8]) {
    for (xk, &s) in x.as_mut_slice().iter_mut().zip(direction) {
        *xk -= eta * s as f64;
    }
}
