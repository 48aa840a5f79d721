//! Hyperparameter schedules of the convergence theorems.
//!
//! The theorems fix exponents only. Every hidden constant is taken from
//! [`ScaleConstants`], which defaults to 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SsvrConfig, SsvrFsConfig};
use crate::error::{Error, Result};

/// Multipliers for the unspecified constants in a preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub eta: f64,
    pub beta: f64,
    pub batch: f64,
}

impl ScaleConstants {
    pub const fn uniform(c: f64) -> Self {
        ScaleConstants {
            eta: c,
            beta: c,
            batch: c,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta", self.eta),
            ("beta", self.beta),
            ("batch", self.batch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "scale constant for {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ScaleConstants {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    /// SSVR, expectation case.
    Theorem1,
    /// SSVR-FS, finite sum.
    Theorem2,
    /// SSVR-MV with stochastic-sign uplink and deterministic sign downlink.
    Theorem3,
    /// SSVR-MV with projection and stochastic signs in both directions.
    Theorem4,
    /// SSVR under generalized smoothness.
    Theorem5,
    /// SSVR-FS under generalized smoothness.
    Theorem6,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::Theorem1,
        PresetName::Theorem2,
        PresetName::Theorem3,
        PresetName::Theorem4,
        PresetName::Theorem5,
        PresetName::Theorem6,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Theorem1 => "theorem1",
            PresetName::Theorem2 => "theorem2",
            PresetName::Theorem3 => "theorem3",
            PresetName::Theorem4 => "theorem4",
            PresetName::Theorem5 => "theorem5",
            PresetName::Theorem6 => "theorem6",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "preset",
                name: s.to_string(),
            })
    }
}

/// A centralized preset, populated except for the seed and starting point.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Ssvr(SsvrConfig),
    SsvrFs(SsvrFsConfig),
}

fn need(name: &str, v: Option<usize>, preset: PresetName) -> Result<usize> {
    match v {
        Some(x) if x >= 1 => Ok(x),
        _ => Err(Error::Config(format!(
            "preset {preset} requires {name} >= 1"
        ))),
    }
}

/// Centralized presets (theorems 1, 2, 5, 6). `m` is required by the
/// finite-sum presets.
///
/// | preset   | beta                | eta                                   | batches / period        |
/// |----------|---------------------|---------------------------------------|-------------------------|
/// | theorem1 | c T^-2/3            | c d^-1/2 T^-2/3                       | B0 = ceil(c T^1/3), B1 = 1 |
/// | theorem2 | c / m               | c m^-1/4 d^-1/2 T^-1/2                | I = m                   |
/// | theorem5 | c d^1/3 T^-2/3      | c d^-1/6 T^-2/3                       | B0 = 1, B1 = ceil(c d)  |
/// | theorem6 | c / m               | c min(m^-1/4 d^-1/2 T^-1/2, 1/(m d))  | I = m                   |
///
/// `beta` is capped at 1.
pub fn preset(
    name: PresetName,
    iterations: usize,
    d: usize,
    m: Option<usize>,
    scale: ScaleConstants,
) -> Result<Preset> {
    scale.validate()?;
    if iterations == 0 || d == 0 {
        return Err(Error::Config("preset requires T >= 1 and d >= 1".into()));
    }
    let t = iterations as f64;
    let df = d as f64;
    let t23 = t.cbrt() * t.cbrt();
    let ceil_batch = |x: f64| -> usize {
        // guard against cbrt(1000) = 9.999999999999998
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
        .max(1)
    };
    let cfg = match name {
        PresetName::Theorem1 => Preset::Ssvr(SsvrConfig::new(
            iterations,
            scale.eta / (df.sqrt() * t23),
            (scale.beta / t23).min(1.0),
            ceil_batch(scale.batch * t.cbrt()),
            1,
            0,
        )),
        PresetName::Theorem5 => Preset::Ssvr(SsvrConfig::new(
            iterations,
            scale.eta / (df.powf(1.0 / 6.0) * t23),
            (scale.beta * df.cbrt() / t23).min(1.0),
            1,
            ceil_batch(scale.batch * df),
            0,
        )),
        PresetName::Theorem2 | PresetName::Theorem6 => {
            let m = need("m", m, name)?;
            let mf = m as f64;
            let base = 1.0 / (mf.powf(0.25) * df.sqrt() * t.sqrt());
            let eta = if name == PresetName::Theorem2 {
                scale.eta * base
            } else {
                scale.eta * base.min(1.0 / (mf * df))
            };
            Preset::SsvrFs(SsvrFsConfig::new(
                iterations,
                eta,
                (scale.beta / mf).min(1.0),
                m,
                0,
            ))
        }
        PresetName::Theorem3 | PresetName::Theorem4 => {
            return Err(Error::Config(format!(
                "{name} is a majority-vote preset; use majority_vote::preset_mv"
            )))
        }
    };
    Ok(cfg)
}
