//! Config-driven experiments: TOML configs, per-seed and averaged CSVs,
//! `T` sweeps with a log-log rate fit, and the self-check suite.

mod config;
mod csv;
mod fit;
mod run;
mod suite;

pub use config::{
    AlgorithmName, AlgorithmSpec, ExperimentConfig, ProblemSpec, ScaleSpec, SweepSpec,
};
pub use csv::{format_csv, mean_rows, parse_csv, read_csv, write_atomic, write_csv, HEADER};
pub use fit::{fit_rate_exponent, SlopeFit};
pub use run::{
    resolve, run_and_write, run_experiment, run_sweep, sweep_and_write, ExperimentOutput, Problem,
    Resolved, RunOptions, SeedRun, SweepOutput,
};
pub use suite::{run_verify_suite, CheckOutcome};
