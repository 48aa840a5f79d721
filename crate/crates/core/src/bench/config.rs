//! TOML experiment configuration.
//!
//! ```toml
//! T = 1000
//! seeds = [1, 2, 3]
//! metrics_every = 10
//! output_path = "runs/quadratic"
//!
//! [problem]
//! name = "noisy_quadratic"
//! d = 20
//! condition_number = 10.0
//! sigma = 1.0
//!
//! [algorithm]
//! name = "ssvr"
//! preset = "theorem1"
//! scale_constants = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majority_vote::TieMode;
use crate::optimizers::{PresetName, ScaleConstants};
use crate::oracles::NoiseModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub iterations: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub metrics_every: usize,
    /// Output directory; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub output_path: Option<String>,
    /// Starting point; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_envelope() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    NoisyQuadratic {
        d: usize,
        #[serde(default = "unit")]
        condition_number: f64,
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        noise: NoiseModel,
        #[serde(default)]
        seed: u64,
    },
    FiniteSumQuadratic {
        d: usize,
        m: usize,
        #[serde(default)]
        seed: u64,
    },
    NonconvexLogistic {
        d: usize,
        n_samples: usize,
        #[serde(default)]
        reg_lambda: f64,
        #[serde(default)]
        seed: u64,
    },
    HeterogeneousQuadratic {
        d: usize,
        /// Number of nodes.
        n: usize,
        #[serde(default)]
        heterogeneity: f64,
        #[serde(default = "unit")]
        condition_number: f64,
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        noise: NoiseModel,
        #[serde(default = "default_envelope")]
        envelope_radius: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Two nodes with opposite minimizers `+e_1`, `-e_1`.
    SignConflict {
        d: usize,
        #[serde(default = "default_envelope")]
        envelope_radius: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Ssvr,
    SsvrFs,
    Signsgd,
    Signum,
    Sgd,
    /// Distributed SSVR with majority vote, Option 1 or 2.
    SsvrMv,
    /// Deterministic double-sign majority vote.
    SignMv,
}

impl AlgorithmName {
    pub fn is_distributed(&self) -> bool {
        matches!(self, AlgorithmName::SsvrMv | AlgorithmName::SignMv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Uniform(f64),
    PerParameter(ScaleConstants),
}

impl ScaleSpec {
    pub fn constants(&self) -> ScaleConstants {
        match *self {
            ScaleSpec::Uniform(c) => ScaleConstants::uniform(c),
            ScaleSpec::PerParameter(s) => s,
        }
    }
}

/// Algorithm choice plus either a preset, explicit hyperparameters, or a
/// preset with explicit overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    #[serde(default)]
    pub preset: Option<PresetName>,
    #[serde(default)]
    pub scale_constants: Option<ScaleSpec>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub batch0: Option<usize>,
    #[serde(default)]
    pub batch1: Option<usize>,
    #[serde(default)]
    pub snapshot_period: Option<usize>,
    /// Mini-batch of the baselines.
    #[serde(default)]
    pub batch: Option<usize>,
    #[serde(default)]
    pub momentum: Option<f64>,
    /// Majority-vote option, 1 or 2.
    #[serde(default)]
    pub option: Option<u8>,
    /// Node count; must agree with the problem when both are given.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub tie_mode: Option<TieMode>,
    /// Gradient bound; taken from the problem when absent.
    #[serde(default, rename = "G")]
    pub g_bound: Option<f64>,
    #[serde(default)]
    pub parallel: bool,
}

impl AlgorithmSpec {
    pub fn named(name: AlgorithmName) -> Self {
        AlgorithmSpec {
            name,
            preset: None,
            scale_constants: None,
            eta: None,
            beta: None,
            batch0: None,
            batch1: None,
            snapshot_period: None,
            batch: None,
            momentum: None,
            option: None,
            nodes: None,
            tie_mode: None,
            g_bound: None,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Values of `T`; presets are re-resolved for each.
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<usize>,
    /// `grad_l1` or `grad_l2`, run-averaged.
    #[serde(default = "default_metric")]
    pub metric: String,
}

fn default_metric() -> String {
    "grad_l1".into()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics_every == 0 {
            return Err(Error::Config("metrics_every must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.t_grid.is_empty() || sweep.t_grid.contains(&0) {
                return Err(Error::Config(
                    "sweep T_grid must list positive values".into(),
                ));
            }
            if !matches!(sweep.metric.as_str(), "grad_l1" | "grad_l2") {
                return Err(Error::Unknown {
                    kind: "sweep metric",
                    name: sweep.metric.clone(),
                });
            }
        }
        if let Some(opt) = self.algorithm.option {
            if !self.algorithm.name.is_distributed() {
                return Err(Error::Config(
                    "`option` only applies to ssvr_mv / sign_mv".into(),
                ));
            }
            crate::majority_vote::MvOption::from_number(opt)?;
        }
        Ok(())
    }
}
