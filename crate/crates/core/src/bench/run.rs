//! Turns an [`ExperimentConfig`] into concrete runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{AlgorithmName, AlgorithmSpec, ExperimentConfig, ProblemSpec};
use super::csv::{mean_rows, write_atomic, write_csv};
use super::fit::{fit_rate_exponent, SlopeFit};
use crate::error::{Error, Result};
use crate::majority_vote::{baseline_mv_run, mv_run, preset_mv, MvConfig, MvOption};
use crate::metrics::{RunResult, RunSummary};
use crate::optimizers::{
    preset, sgd_run, signsgd_run, signum_run, ssvr_fs_run, ssvr_run, BaselineConfig, Preset,
    PresetName, ScaleConstants, SsvrConfig, SsvrFsConfig,
};
use crate::oracles::{
    make_finite_sum_quadratic, make_noisy_quadratic_with, make_nonconvex_logistic,
    partition_heterogeneous, sign_conflict_pair, AsStochastic, FiniteSumProblem, NodePartition,
    PartitionSpec, StochasticGradOracle,
};
use crate::vector::DenseVector;

/// A built objective.
pub enum Problem {
    Stochastic(Box<dyn StochasticGradOracle>),
    FiniteSum(Box<dyn FiniteSumProblem>),
    Partition(NodePartition),
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        Ok(match *spec {
            ProblemSpec::NoisyQuadratic {
                d,
                condition_number,
                sigma,
                noise,
                seed,
            } => Problem::Stochastic(Box::new(make_noisy_quadratic_with(
                d,
                condition_number,
                sigma,
                noise,
                seed,
            )?)),
            ProblemSpec::FiniteSumQuadratic { d, m, seed } => {
                Problem::FiniteSum(Box::new(make_finite_sum_quadratic(d, m, seed)?))
            }
            ProblemSpec::NonconvexLogistic {
                d,
                n_samples,
                reg_lambda,
                seed,
            } => Problem::FiniteSum(Box::new(make_nonconvex_logistic(
                d, n_samples, reg_lambda, seed,
            )?)),
            ProblemSpec::HeterogeneousQuadratic {
                d,
                n,
                heterogeneity,
                condition_number,
                sigma,
                noise,
                envelope_radius,
                seed,
            } => {
                let spec = PartitionSpec {
                    d,
                    condition_number,
                    sigma,
                    noise,
                    envelope_radius,
                };
                Problem::Partition(partition_heterogeneous(&spec, n, heterogeneity, seed)?)
            }
            ProblemSpec::SignConflict { d, envelope_radius } => {
                Problem::Partition(sign_conflict_pair(d, envelope_radius)?)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Stochastic(o) => o.dim(),
            Problem::FiniteSum(p) => p.dim(),
            Problem::Partition(p) => p.dim(),
        }
    }
}

/// Hyperparameters after presets and overrides, with the seed still unset.
#[derive(Clone, Debug, PartialEq)]
pub enum Resolved {
    Ssvr(SsvrConfig),
    SsvrFs(SsvrFsConfig),
    SignSgd(BaselineConfig),
    Signum(BaselineConfig),
    Sgd(BaselineConfig),
    SsvrMv(MvConfig),
    SignMv(MvConfig),
}

fn required(v: Option<f64>, what: &str, alg: AlgorithmName) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("{alg:?} needs `{what}` or a preset")))
}

fn scale_of(spec: &AlgorithmSpec) -> ScaleConstants {
    spec.scale_constants
        .map(|s| s.constants())
        .unwrap_or_default()
}

fn wrong_preset(p: PresetName, alg: AlgorithmName) -> Error {
    Error::Config(format!("preset {p} does not apply to {alg:?}"))
}

/// Resolves the hyperparameters of `cfg` at horizon `iterations`.
pub fn resolve(cfg: &ExperimentConfig, problem: &Problem, iterations: usize) -> Result<Resolved> {
    let spec = &cfg.algorithm;
    let alg = spec.name;
    let d = problem.dim();
    let x0 = match &cfg.x0 {
        Some(v) => {
            let x = DenseVector::new(v.clone())?;
            x.ensure_dim(d)?;
            Some(x)
        }
        None => None,
    };
    let mut resolved = match alg {
        AlgorithmName::Ssvr => {
            if matches!(problem, Problem::Partition(_)) {
                return Err(Error::Config("ssvr runs on a single-node problem".into()));
            }
            let mut c = match spec.preset {
                Some(p @ (PresetName::Theorem1 | PresetName::Theorem5)) => {
                    match preset(p, iterations, d, None, scale_of(spec))? {
                        Preset::Ssvr(c) => c,
                        Preset::SsvrFs(_) => unreachable!("theorem1/5 are single-loop presets"),
                    }
                }
                Some(p) => return Err(wrong_preset(p, alg)),
                None => SsvrConfig::new(
                    iterations,
                    required(spec.eta, "eta", alg)?,
                    required(spec.beta, "beta", alg)?,
                    1,
                    1,
                    0,
                ),
            };
            c.eta = spec.eta.unwrap_or(c.eta);
            c.beta = spec.beta.unwrap_or(c.beta);
            c.batch0 = spec.batch0.unwrap_or(c.batch0);
            c.batch1 = spec.batch1.unwrap_or(c.batch1);
            c.x0 = x0;
            Resolved::Ssvr(c)
        }
        AlgorithmName::SsvrFs => {
            let Problem::FiniteSum(p) = problem else {
                return Err(Error::Config("ssvr_fs needs a finite-sum problem".into()));
            };
            let m = p.num_components();
            let mut c = match spec.preset {
                Some(pn @ (PresetName::Theorem2 | PresetName::Theorem6)) => {
                    match preset(pn, iterations, d, Some(m), scale_of(spec))? {
                        Preset::SsvrFs(c) => c,
                        Preset::Ssvr(_) => unreachable!("theorem2/6 are finite-sum presets"),
                    }
                }
                Some(pn) => return Err(wrong_preset(pn, alg)),
                None => SsvrFsConfig::new(
                    iterations,
                    required(spec.eta, "eta", alg)?,
                    required(spec.beta, "beta", alg)?,
                    m,
                    0,
                ),
            };
            c.eta = spec.eta.unwrap_or(c.eta);
            c.beta = spec.beta.unwrap_or(c.beta);
            c.snapshot_period = spec.snapshot_period.unwrap_or(c.snapshot_period);
            c.x0 = x0;
            Resolved::SsvrFs(c)
        }
        AlgorithmName::Signsgd | AlgorithmName::Signum | AlgorithmName::Sgd => {
            if matches!(problem, Problem::Partition(_)) {
                return Err(Error::Config(format!(
                    "{alg:?} runs on a single-node problem"
                )));
            }
            if let Some(p) = spec.preset {
                return Err(wrong_preset(p, alg));
            }
            let mut c = BaselineConfig::new(
                iterations,
                required(spec.eta, "eta", alg)?,
                spec.batch.unwrap_or(1),
                0,
            );
            c.x0 = x0;
            match alg {
                AlgorithmName::Signsgd => Resolved::SignSgd(c),
                AlgorithmName::Signum => {
                    c.momentum = spec.momentum.unwrap_or(0.9);
                    Resolved::Signum(c)
                }
                _ => Resolved::Sgd(c),
            }
        }
        AlgorithmName::SsvrMv | AlgorithmName::SignMv => {
            let Problem::Partition(part) = problem else {
                return Err(Error::Config(format!("{alg:?} needs a multi-node problem")));
            };
            let n = part.num_nodes();
            if let Some(k) = spec.nodes {
                if k != n {
                    return Err(Error::Config(format!(
                        "nodes = {k} but the problem has {n} nodes"
                    )));
                }
            }
            let option = spec.option.map(MvOption::from_number).transpose()?;
            let mut c = match spec.preset {
                Some(p @ (PresetName::Theorem3 | PresetName::Theorem4)) => {
                    let c = preset_mv(p, iterations, d, n, spec.g_bound, scale_of(spec))?;
                    if option.is_some_and(|o| o != c.option) {
                        return Err(Error::Config(format!(
                            "preset {p} fixes option {:?}",
                            c.option
                        )));
                    }
                    c
                }
                Some(p) => return Err(wrong_preset(p, alg)),
                None => {
                    let beta = match (spec.beta, alg) {
                        (Some(b), _) => b,
                        (None, AlgorithmName::SignMv) => 1.0,
                        (None, _) => required(None, "beta", alg)?,
                    };
                    MvConfig::new(
                        option.unwrap_or(MvOption::One),
                        n,
                        iterations,
                        required(spec.eta, "eta", alg)?,
                        beta,
                        0,
                    )
                }
            };
            c.eta = spec.eta.unwrap_or(c.eta);
            c.beta = spec.beta.unwrap_or(c.beta);
            c.g_bound = spec.g_bound.or(c.g_bound);
            c.tie_mode = spec.tie_mode.unwrap_or(c.tie_mode);
            c.parallel = spec.parallel;
            c.x0 = x0;
            if alg == AlgorithmName::SsvrMv {
                Resolved::SsvrMv(c)
            } else {
                Resolved::SignMv(c)
            }
        }
    };
    resolved.set_stride(cfg.metrics_every);
    Ok(resolved)
}

fn with_oracle(
    problem: &Problem,
    f: impl FnOnce(&dyn StochasticGradOracle) -> Result<RunResult>,
) -> Result<RunResult> {
    match problem {
        Problem::Stochastic(o) => f(o.as_ref()),
        Problem::FiniteSum(p) => f(&AsStochastic(p.as_ref())),
        Problem::Partition(_) => Err(Error::Config(
            "single-node algorithm on a multi-node problem".into(),
        )),
    }
}

impl Resolved {
    fn set_stride(&mut self, every: usize) {
        match self {
            Resolved::Ssvr(c) => c.metrics_every = every,
            Resolved::SsvrFs(c) => c.metrics_every = every,
            Resolved::SignSgd(c) | Resolved::Signum(c) | Resolved::Sgd(c) => {
                c.metrics_every = every
            }
            Resolved::SsvrMv(c) | Resolved::SignMv(c) => c.metrics_every = every,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Resolved::Ssvr(c) => c.seed = seed,
            Resolved::SsvrFs(c) => c.seed = seed,
            Resolved::SignSgd(c) | Resolved::Signum(c) | Resolved::Sgd(c) => c.seed = seed,
            Resolved::SsvrMv(c) | Resolved::SignMv(c) => c.seed = seed,
        }
        out
    }

    /// Flat description written to the manifest.
    pub fn describe(&self) -> Value {
        match self {
            Resolved::Ssvr(c) => json!({
                "algorithm": "ssvr", "T": c.iterations, "eta": c.eta, "beta": c.beta,
                "batch0": c.batch0, "batch1": c.batch1,
            }),
            Resolved::SsvrFs(c) => json!({
                "algorithm": "ssvr_fs", "T": c.iterations, "eta": c.eta, "beta": c.beta,
                "snapshot_period": c.snapshot_period,
            }),
            Resolved::SignSgd(c) | Resolved::Signum(c) | Resolved::Sgd(c) => {
                let name = match self {
                    Resolved::SignSgd(_) => "signsgd",
                    Resolved::Signum(_) => "signum",
                    _ => "sgd",
                };
                json!({
                    "algorithm": name, "T": c.iterations, "eta": c.eta, "batch": c.batch,
                    "momentum": c.momentum,
                })
            }
            Resolved::SsvrMv(c) | Resolved::SignMv(c) => json!({
                "algorithm": if matches!(self, Resolved::SsvrMv(_)) { "ssvr_mv" } else { "sign_mv" },
                "T": c.iterations, "eta": c.eta, "beta": c.beta, "option": c.option,
                "nodes": c.nodes, "G": c.g_bound, "tie_mode": c.tie_mode,
            }),
        }
    }

    pub fn execute(&self, problem: &Problem) -> Result<RunResult> {
        match self {
            Resolved::Ssvr(c) => with_oracle(problem, |o| ssvr_run(o, c)),
            Resolved::SignSgd(c) => with_oracle(problem, |o| signsgd_run(o, c)),
            Resolved::Signum(c) => with_oracle(problem, |o| signum_run(o, c)),
            Resolved::Sgd(c) => with_oracle(problem, |o| sgd_run(o, c)),
            Resolved::SsvrFs(c) => match problem {
                Problem::FiniteSum(p) => ssvr_fs_run(p.as_ref(), c),
                _ => Err(Error::Config("ssvr_fs needs a finite-sum problem".into())),
            },
            Resolved::SsvrMv(c) | Resolved::SignMv(c) => {
                let Problem::Partition(part) = problem else {
                    return Err(Error::Config(
                        "majority vote needs a multi-node problem".into(),
                    ));
                };
                if matches!(self, Resolved::SsvrMv(_)) {
                    mv_run(part, c)
                } else {
                    baseline_mv_run(part, c)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Added to every configured seed.
    pub seed_offset: u64,
}

pub struct SeedRun {
    pub seed: u64,
    pub result: RunResult,
}

pub struct ExperimentOutput {
    pub iterations: usize,
    pub hyperparameters: Value,
    pub runs: Vec<SeedRun>,
}

impl ExperimentOutput {
    /// Seed average of a summary statistic.
    pub fn mean_summary(&self, f: impl Fn(&RunSummary) -> f64) -> f64 {
        let xs: Vec<f64> = self.runs.iter().map(|r| f(&r.result.summary)).collect();
        crate::verify::pairwise_sum(&xs) / xs.len() as f64
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_at(
    cfg: &ExperimentConfig,
    problem: &Problem,
    iterations: usize,
    opts: RunOptions,
) -> Result<ExperimentOutput> {
    let resolved = resolve(cfg, problem, iterations)?;
    let runs: Vec<Result<SeedRun>> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let seed = s.wrapping_add(opts.seed_offset);
            resolved
                .with_seed(seed)
                .execute(problem)
                .map(|result| SeedRun { seed, result })
        })
        .collect();
    Ok(ExperimentOutput {
        iterations,
        hyperparameters: resolved.describe(),
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}

/// Runs every seed in memory. Nothing is written.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let problem = Problem::build(&cfg.problem)?;
    with_pool(opts.jobs, || run_at(cfg, &problem, cfg.iterations, opts))?
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    tau_out: usize,
    summary: &'a RunSummary,
}

fn manifest(
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    opts: RunOptions,
    elapsed: f64,
) -> Value {
    json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "T": out.iterations,
        "seed_offset": opts.seed_offset,
        "hyperparameters": out.hyperparameters,
        "runs": out.runs.iter().map(|r| SeedSummary { seed: r.seed, tau_out: r.result.tau_out, summary: &r.result.summary }).collect::<Vec<_>>(),
        "wall_clock_seconds": elapsed,
    })
}

fn write_output(
    dir: &Path,
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    opts: RunOptions,
    elapsed: f64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for run in &out.runs {
        let path = dir.join(format!("seed_{}.csv", run.seed));
        write_csv(&path, &run.result.rows)?;
        written.push(path);
    }
    let per_seed: Vec<&[crate::MetricsRow]> =
        out.runs.iter().map(|r| r.result.rows.as_slice()).collect();
    let path = dir.join("mean.csv");
    write_csv(&path, &mean_rows(&per_seed)?)?;
    written.push(path);
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest(cfg, out, opts, elapsed))
        .map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Runs the experiment and writes `seed_<s>.csv`, `mean.csv` and
/// `manifest.json` under `dir`. All runs finish before the first write, so a
/// failing run leaves nothing behind.
pub fn run_and_write(cfg: &ExperimentConfig, dir: &Path, opts: RunOptions) -> Result<Vec<PathBuf>> {
    let start = std::time::Instant::now();
    let out = run_experiment(cfg, opts)?;
    write_output(dir, cfg, &out, opts, start.elapsed().as_secs_f64())
}

pub struct SweepOutput {
    pub metric: String,
    pub points: Vec<(usize, f64)>,
    pub fit: SlopeFit,
    pub experiments: Vec<ExperimentOutput>,
}

/// Runs the config at every `T` of its sweep grid and fits
/// `log(metric) = exponent * log(T) + intercept`.
pub fn run_sweep(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SweepOutput> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [sweep] table".into()))?;
    let problem = Problem::build(&cfg.problem)?;
    let experiments: Vec<ExperimentOutput> = with_pool(opts.jobs, || {
        sweep
            .t_grid
            .par_iter()
            .map(|&t| run_at(cfg, &problem, t, opts))
            .collect::<Result<Vec<_>>>()
    })??;
    let pick: fn(&RunSummary) -> f64 = match sweep.metric.as_str() {
        "grad_l2" => |s| s.avg_grad_l2,
        _ => |s| s.avg_grad_l1,
    };
    let points: Vec<(usize, f64)> = experiments
        .iter()
        .map(|e| (e.iterations, e.mean_summary(pick)))
        .collect();
    let fit = fit_rate_exponent(
        &points
            .iter()
            .map(|&(t, v)| (t as f64, v))
            .collect::<Vec<_>>(),
    )?;
    Ok(SweepOutput {
        metric: sweep.metric.clone(),
        points,
        fit,
        experiments,
    })
}

/// Runs a sweep and writes one subdirectory `T_<T>` per grid value plus
/// `sweep.csv` and `fit.json`.
pub fn sweep_and_write(
    cfg: &ExperimentConfig,
    dir: &Path,
    opts: RunOptions,
) -> Result<SweepOutput> {
    let start = std::time::Instant::now();
    let out = run_sweep(cfg, opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    for exp in &out.experiments {
        write_output(
            &dir.join(format!("T_{}", exp.iterations)),
            cfg,
            exp,
            opts,
            elapsed,
        )?;
    }
    let mut table = format!("T,{}\n", out.metric);
    for (t, v) in &out.points {
        table.push_str(&format!("{t},{v:.16e}\n"));
    }
    write_atomic(&dir.join("sweep.csv"), table.as_bytes())?;
    let text = serde_json::to_string_pretty(&json!({ "metric": out.metric, "fit": out.fit }))
        .map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join("fit.json"), text.as_bytes())?;
    Ok(out)
}
