//! Log-log least-squares fit of a metric against the horizon `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Slope of `log(metric)` against `log(T)`.
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub grid: Vec<f64>,
}

impl SlopeFit {
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.exponent * t.ln()).exp()
    }
}

/// Needs at least three points with distinct, positive `T` and positive
/// metric values.
pub fn fit_rate_exponent(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(t, v)| !(t > 0.0 && t.is_finite() && v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidInput(
            "rate fit needs positive finite T and metric values".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-12 * mx.abs().max(1.0) {
        return Err(Error::InvalidInput(
            "rate fit needs at least two distinct T values".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(SlopeFit {
        exponent: slope,
        intercept,
        r2,
        grid: points.iter().map(|p| p.0).collect(),
    })
}
