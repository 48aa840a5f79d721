use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssvr::bench::{run_and_write, run_verify_suite, sweep_and_write, ExperimentConfig, RunOptions};
use ssvr::majority_vote::{preset_mv, MvOption};
use ssvr::optimizers::{preset, Preset, PresetName, ScaleConstants};

#[derive(Parser)]
#[command(
    name = "ssvr",
    version,
    about = "Sign-based variance-reduced optimizers: experiments and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment: a CSV per seed, a seed-averaged CSV and a manifest.
    Run(RunArgs),
    /// Run the experiment at every T of its [sweep] grid and fit the rate exponent.
    Sweep(RunArgs),
    /// Run the built-in oracle checks.
    Verify,
    /// Print every preset for the given sizes.
    Presets(PresetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_path` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Args)]
struct PresetArgs {
    #[arg(long = "t", short = 'T', value_name = "T")]
    t: usize,
    #[arg(long)]
    d: usize,
    /// Number of components (theorem2, theorem6).
    #[arg(long)]
    m: Option<usize>,
    /// Number of nodes (theorem3, theorem4).
    #[arg(long)]
    n: Option<usize>,
    /// Gradient bound G reported with the majority-vote presets.
    #[arg(long)]
    g: Option<f64>,
    /// Uniform scale constant.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf, RunOptions), String> {
    let path = args
        .path
        .as_ref()
        .or(args.config.as_ref())
        .expect("clap requires a config");
    let cfg = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
    let out = match (&args.out, &cfg.output_path) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => return Err("no output directory: pass --out or set output_path".into()),
    };
    let opts = RunOptions {
        jobs: args.jobs,
        seed_offset: args.seed_offset,
    };
    Ok((cfg, out, opts))
}

fn cmd_run(args: &RunArgs) -> Result<(), String> {
    let (cfg, out, opts) = load(args)?;
    let files = run_and_write(&cfg, &out, opts).map_err(|e| e.to_string())?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<(), String> {
    let (cfg, out, opts) = load(args)?;
    let res = sweep_and_write(&cfg, &out, opts).map_err(|e| e.to_string())?;
    for (t, v) in &res.points {
        println!("T = {t:>8}  {} = {v:.6e}", res.metric);
    }
    println!(
        "exponent {:.4}  intercept {:.4}  R^2 {:.4}",
        res.fit.exponent, res.fit.intercept, res.fit.r2
    );
    println!("results in {}", out.display());
    Ok(())
}

fn cmd_verify() -> Result<(), String> {
    let checks = run_verify_suite();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!(
            "{} {:<28} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if failed > 0 {
        return Err(format!("{failed} of {} checks failed", checks.len()));
    }
    Ok(())
}

fn cmd_presets(a: &PresetArgs) -> Result<(), String> {
    let scale = ScaleConstants::uniform(a.scale);
    for name in PresetName::ALL {
        let line = match name {
            PresetName::Theorem3 | PresetName::Theorem4 => {
                match preset_mv(name, a.t, a.d, a.n.unwrap_or(1), a.g, scale) {
                    Ok(c) => {
                        let g = c
                            .g_bound
                            .map_or("from problem".to_string(), |g| g.to_string());
                        let option = if c.option == MvOption::One { 1 } else { 2 };
                        let mut s =
                            format!("option={option} eta={:e} beta={} G={g}", c.eta, c.beta);
                        if name == PresetName::Theorem3 {
                            s.push_str(
                                &c.g_bound
                                    .map_or(" R=4G".to_string(), |g| format!(" R={}", c.radius(g))),
                            );
                        }
                        s
                    }
                    Err(e) => format!("unavailable: {e}"),
                }
            }
            _ => match preset(name, a.t, a.d, a.m, scale) {
                Ok(Preset::Ssvr(c)) => format!(
                    "eta={:e} beta={} B0={} B1={}",
                    c.eta, c.beta, c.batch0, c.batch1
                ),
                Ok(Preset::SsvrFs(c)) => {
                    format!("eta={:e} beta={} I={}", c.eta, c.beta, c.snapshot_period)
                }
                Err(_) => "unavailable: pass --m".to_string(),
            },
        };
        println!("{:<9} {line}", name.as_str());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify => cmd_verify(),
        Command::Presets(a) => cmd_presets(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
