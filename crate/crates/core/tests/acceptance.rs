//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p ssvr --test acceptance`.

use std::time::{Duration, Instant};

use rand::Rng;
use ssvr::bench::{
    run_and_write, run_experiment, run_sweep, AlgorithmName, AlgorithmSpec, ExperimentConfig,
    ProblemSpec, RunOptions, ScaleSpec, SweepSpec,
};
use ssvr::majority_vote::{
    mv_run, server_aggregate, MvConfig, MvOption, ServerRule, TieMode, WorkerMessage,
};
use ssvr::optimizers::{
    fs_estimator_update, preset, ssvr_fs_run, ssvr_run, Preset, PresetName, ScaleConstants,
    Snapshot, SsvrConfig, SsvrFsConfig,
};
use ssvr::oracles::{
    make_finite_sum_quadratic, make_noisy_quadratic, make_nonconvex_logistic,
    partition_heterogeneous, FiniteSumProblem, NoiseModel, PartitionSpec, StochasticGradOracle,
};
use ssvr::verify::{enumerate_vote_distribution, svrg_reference_estimator};
use ssvr::{stochastic_sign, BitSignVector, DenseVector, RngStream};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

// 1. stochastic sign unbiasedness
fn c1_stochastic_sign_unbiased() -> Verdict {
    let start = Instant::now();
    let v = DenseVector::new(vec![0.5, -0.25, 0.0]).unwrap();
    let radius = 1.0;
    let n = 200_000;
    let mut rng = RngStream::new(2024, "acceptance/c1");
    let mut sums = [0i64; 3];
    for _ in 0..n {
        let s = stochastic_sign(&v, radius, &mut rng).unwrap().to_dense();
        for k in 0..3 {
            sums[k] += s[k] as i64;
        }
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    for k in 0..3 {
        let target = v[k] / radius;
        let tol = 4.0 * ((1.0 - target * target) / n as f64).sqrt();
        let dev = (sums[k] as f64 / n as f64 - target).abs();
        ok &= dev <= tol;
        worst = worst.max(dev / tol);
    }
    let t = start.elapsed();
    verdict(
        ok && within(t, Duration::from_secs(5)),
        format!(
            "worst deviation {worst:.3} of tolerance, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

// 2. noiseless recursive estimator stays exact
fn c2_noiseless_exact() -> Verdict {
    let q = make_noisy_quadratic(20, 10.0, 0.0, 7).unwrap();
    // analytic gradient diag * (x - x*) checked against the oracle first
    let x = DenseVector::from_fn(20, |k| (k as f64 * 0.37).sin());
    let analytic = DenseVector::from_fn(20, |k| q.diag()[k] * (x[k] - q.minimizer()[k]));
    let oracle_gap = q.grad_true(&x).max_abs_diff(&analytic);
    let mut cfg = SsvrConfig::new(1000, 1e-3, 0.05, 1, 1, 7);
    cfg.metrics_every = 1;
    let run = ssvr_run(&q, &cfg).unwrap();
    let err = run.summary.max_est_err_linf;
    verdict(
        err <= 1e-10 && oracle_gap == 0.0 && run.rows.len() == 1000,
        format!("max_t |v_t - grad f(x_t)|_inf = {err:.3e}"),
    )
}

fn exact_sign_descent(p: &dyn FiniteSumProblem, iters: usize, eta: f64) -> DenseVector {
    let mut x = DenseVector::zeros(p.dim());
    for _ in 0..iters {
        let g = p.full_grad(&x);
        for k in 0..x.dim() {
            let s = if g[k] > 0.0 {
                1.0
            } else if g[k] < 0.0 {
                -1.0
            } else {
                0.0
            };
            x[k] -= eta * s;
        }
    }
    x
}

// 3. finite-sum estimator with beta = 1 is SVRG; m = 1 collapses
fn c3_svrg_equivalence() -> Verdict {
    let mut rng = RngStream::new(3, "acceptance/c3");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=10);
        let m = rng.random_range(1..=8);
        let p = make_finite_sum_quadratic(d, m, rng.random()).unwrap();
        let mut draw = || DenseVector::from_fn(d, |_| rng.random_range(-3.0..3.0));
        let (x_t, x_prev, x_snap, v_prev) = (draw(), draw(), draw(), draw());
        let i = rng.random_range(0..m);
        let got = fs_estimator_update(
            &v_prev,
            &x_t,
            &x_prev,
            &Snapshot::take(&p, &x_snap),
            i,
            &p,
            1.0,
        )
        .unwrap();
        let want = svrg_reference_estimator(&p, &x_t, &x_snap, i).unwrap();
        worst = worst.max(got.max_abs_diff(&want));
    }
    let single = make_nonconvex_logistic(6, 1, 0.1, 3).unwrap();
    let mut cfg = SsvrFsConfig::new(500, 0.002, 0.2, 5, 3);
    cfg.metrics_every = 1;
    let run = ssvr_fs_run(&single, &cfg).unwrap();
    let collapse = run.summary.max_est_err_linf;
    let same_path = run.x_final == exact_sign_descent(&single, 500, 0.002);
    verdict(
        worst <= 1e-12 && collapse == 0.0 && same_path,
        format!("max |fs - svrg| = {worst:.2e} over 1000 instances; m=1 max error {collapse:e}, trajectory exact: {same_path}"),
    )
}

fn tail_mean(rows: &[ssvr::MetricsRow], frac: f64) -> f64 {
    let skip = rows.len() - (rows.len() as f64 * frac).round() as usize;
    let tail = &rows[skip..];
    tail.iter().map(|r| r.est_err_sq).sum::<f64>() / tail.len() as f64
}

// 4. variance reduction on a noisy quadratic
fn c4_variance_reduction() -> Verdict {
    let start = Instant::now();
    let t = 50_000;
    let q = make_noisy_quadratic(20, 10.0, 1.0, 4).unwrap();
    let Preset::Ssvr(base) =
        preset(PresetName::Theorem1, t, 20, None, ScaleConstants::default()).unwrap()
    else {
        unreachable!()
    };
    let seeds = 1..=5u64;
    let measure = |beta: f64| -> f64 {
        let vals: Vec<f64> = seeds
            .clone()
            .map(|s| {
                let mut cfg = SsvrConfig::new(t, base.eta, beta, base.batch0, 1, s);
                cfg.metrics_every = 1;
                tail_mean(&ssvr_run(&q, &cfg).unwrap().rows, 0.1)
            })
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let reduced = measure(0.01);
    let plain = measure(1.0);
    let elapsed = start.elapsed();
    verdict(
        reduced <= 0.25
            && (0.8..=1.2).contains(&plain)
            && within(elapsed, Duration::from_secs(120)),
        format!(
            "tail est_err_sq {reduced:.4} (beta=0.01) vs {plain:.4} (plain, beta=1), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// 5. rate exponent on nonconvex logistic
fn c5_rate_exponent() -> Verdict {
    let start = Instant::now();
    let mut algorithm = AlgorithmSpec::named(AlgorithmName::Ssvr);
    algorithm.preset = Some(PresetName::Theorem1);
    let cfg = ExperimentConfig {
        iterations: 2000,
        seeds: (1..=10).collect(),
        metrics_every: 2000,
        output_path: None,
        x0: None,
        problem: ProblemSpec::NonconvexLogistic {
            d: 50,
            n_samples: 200,
            reg_lambda: 0.1,
            seed: 5,
        },
        algorithm,
        sweep: Some(SweepSpec {
            t_grid: vec![2000, 8000, 32_000],
            metric: "grad_l1".into(),
        }),
    };
    let out = run_sweep(&cfg, RunOptions::default()).unwrap();
    let first = out.points[0].1;
    let last = out.points[2].1;
    let ratio = first / last;
    let e = out.fit.exponent;
    let elapsed = start.elapsed();
    verdict(
        (-0.45..=-0.20).contains(&e)
            && (1.4..=4.0).contains(&ratio)
            && within(elapsed, Duration::from_secs(300)),
        format!(
            "exponent {e:.4} (R^2 {:.4}), 16x ratio {ratio:.3}, {:.1}s",
            out.fit.r2,
            elapsed.as_secs_f64()
        ),
    )
}

// 6. full-gradient accounting of SSVR-FS
fn c6_full_gradient_count() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for m in [1usize, 4, 7, 16] {
        let p = make_finite_sum_quadratic(3, m, 6).unwrap();
        let t = 10 * m;
        let run = ssvr_fs_run(&p, &SsvrFsConfig::new(t, 0.01, 1.0 / m as f64, m, 6)).unwrap();
        let expected = 1 + (t - 1) / m;
        ok &= run.summary.full_grad_evals == expected;
        details.push(format!("m={m}: {}/{expected}", run.summary.full_grad_evals));
    }
    verdict(ok, details.join(", "))
}

/// Majority +1 probability over 3 independent voters, by hand.
fn three_voter_majority(p: [f64; 3]) -> f64 {
    let [a, b, c] = p;
    a * b * c + a * b * (1.0 - c) + a * (1.0 - b) * c + (1.0 - a) * b * c
}

fn vote_messages(probs: &[Vec<f64>], rng: &mut RngStream) -> Vec<WorkerMessage> {
    probs
        .iter()
        .enumerate()
        .map(|(j, row)| WorkerMessage {
            round: 1,
            node_id: j as u32,
            payload: BitSignVector::from_fn(row.len(), |k| rng.random::<f64>() < row[k]),
        })
        .collect()
}

/// Frequencies of -1, 0, +1 per coordinate over `rounds` server rounds.
fn simulate_votes(
    probs: &[Vec<f64>],
    rule: ServerRule,
    rounds: usize,
    rng: &mut RngStream,
) -> Vec<[f64; 3]> {
    let d = probs[0].len();
    let mut counts = vec![[0usize; 3]; d];
    for _ in 0..rounds {
        let msgs = vote_messages(probs, rng);
        let out = server_aggregate(&msgs, probs.len(), 1, rule, rng).unwrap();
        for (k, s) in out.payload.signs().iter().enumerate() {
            counts[k][(*s + 1) as usize] += 1;
        }
    }
    counts
        .iter()
        .map(|c| c.map(|x| x as f64 / rounds as f64))
        .collect()
}

fn max_sigma_gap(freq: &[[f64; 3]], exact: &[[f64; 3]], rounds: usize) -> f64 {
    let mut worst = 0.0f64;
    for (f, e) in freq.iter().zip(exact) {
        for s in 0..3 {
            let se = (e[s] * (1.0 - e[s]) / rounds as f64).sqrt();
            let gap = (f[s] - e[s]).abs();
            worst = worst.max(if se == 0.0 {
                if gap == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                gap / se
            });
        }
    }
    worst
}

// 7. exact vote law
fn c7_vote_distribution() -> Verdict {
    let table = vec![vec![0.9, 0.5], vec![0.8, 0.2], vec![0.3, 0.6]];
    let golden = three_voter_majority([0.9, 0.8, 0.3]);
    let law = enumerate_vote_distribution(&table, MvOption::One, TieMode::Ternary).unwrap();
    let golden_ok = (golden - 0.798).abs() < 1e-12 && (law.p_plus(0) - golden).abs() < 1e-12;
    let mut rng = RngStream::new(7, "acceptance/c7");
    let rounds = 100_000;
    let freq = simulate_votes(&table, ServerRule::Sign(TieMode::Ternary), rounds, &mut rng);
    let pinned_gap = max_sigma_gap(&freq, &law.per_coord, rounds);

    let mut random_gap = 0.0f64;
    for i in 0..50 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random()).collect())
            .collect();
        let (option, rule, tie) = match i % 3 {
            0 => (
                MvOption::One,
                ServerRule::Sign(TieMode::Ternary),
                TieMode::Ternary,
            ),
            1 => (
                MvOption::One,
                ServerRule::Sign(TieMode::PlusOne),
                TieMode::PlusOne,
            ),
            _ => (MvOption::Two, ServerRule::StochasticSign, TieMode::Ternary),
        };
        let exact = enumerate_vote_distribution(&probs, option, tie).unwrap();
        let rounds = 20_000;
        let freq = simulate_votes(&probs, rule, rounds, &mut rng);
        random_gap = random_gap.max(max_sigma_gap(&freq, &exact.per_coord, rounds));
    }
    verdict(
        golden_ok && pinned_gap <= 4.0 && random_gap <= 4.0,
        format!(
            "P(+1) = {:.6} (MC {:.6}), pinned table {pinned_gap:.2} se, 50 random tables max {random_gap:.2} se",
            law.p_plus(0),
            freq[0][2]
        ),
    )
}

// 8. Option 1 estimator stays within 4G
fn c8_boundedness() -> Verdict {
    let mut spec = PartitionSpec::new(10);
    spec.sigma = 0.5;
    spec.noise = NoiseModel::Uniform;
    spec.condition_number = 4.0;
    spec.envelope_radius = 2.0;
    let part = partition_heterogeneous(&spec, 8, 1.0, 8).unwrap();
    let g = part
        .bound_g_linf_sample()
        .expect("uniform noise is bounded");
    let mut ok = true;
    let mut exits = 0;
    for seed in 1..=5 {
        let mut cfg = ssvr::majority_vote::preset_mv(
            PresetName::Theorem3,
            10_000,
            10,
            8,
            None,
            ScaleConstants::default(),
        )
        .unwrap();
        cfg.seed = seed;
        cfg.x0 = Some(part.center().clone());
        cfg.metrics_every = 100;
        match mv_run(&part, &cfg) {
            Ok(r) => exits += r.summary.envelope_exits,
            Err(e) => {
                ok = false;
                eprintln!("seed {seed}: {e}");
            }
        }
    }
    verdict(
        ok && exits == 0,
        format!("G = {g:.4}, 5 seeds x 10^4 rounds x 8 nodes, no violation: {ok}, envelope exits {exits}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// 9. heterogeneity: Option 2 converges where the sign baseline stalls
fn c9_heterogeneity() -> Verdict {
    let config = |name: AlgorithmName| {
        let mut algorithm = AlgorithmSpec::named(name);
        algorithm.preset = Some(PresetName::Theorem4);
        algorithm.scale_constants = Some(ScaleSpec::Uniform(0.25));
        ExperimentConfig {
            iterations: 10_000,
            seeds: (1..=10).collect(),
            metrics_every: 1000,
            output_path: None,
            x0: Some(vec![0.9, 0.0]),
            problem: ProblemSpec::SignConflict {
                d: 2,
                envelope_radius: 1.0,
            },
            algorithm,
            sweep: None,
        }
    };
    let final_norms = |name| {
        let out = run_experiment(&config(name), RunOptions::default()).unwrap();
        median(
            out.runs
                .iter()
                .map(|r| r.result.summary.final_grad_l2)
                .collect(),
        )
    };
    let option2 = final_norms(AlgorithmName::SsvrMv);
    let stall = final_norms(AlgorithmName::SignMv);
    verdict(
        option2 <= 0.1 * stall,
        format!("median final |grad f|_2: option 2 {option2:.4}, baseline stall {stall:.4}"),
    )
}

// 10. ledger counts exactly one bit per coordinate each way
fn c10_communication() -> Verdict {
    let mut ok = true;
    let mut details = Vec::new();
    for (n, d) in [(3usize, 7usize), (8, 64), (5, 1000)] {
        let mut spec = PartitionSpec::new(d);
        spec.sigma = 0.1;
        spec.noise = NoiseModel::Uniform;
        let part = partition_heterogeneous(&spec, n, 0.5, 10).unwrap();
        let rounds = 12;
        let run = mv_run(
            &part,
            &MvConfig::new(MvOption::Two, n, rounds, 1e-3, 0.5, 10),
        )
        .unwrap();
        let ledger = run.ledger.unwrap();
        let bytes = d.div_ceil(8);
        ok &= ledger.rounds.len() == rounds;
        ok &= ledger
            .rounds
            .iter()
            .all(|r| r.uplink_payload == n * bytes && r.downlink_payload == bytes);
        details.push(format!("(n={n}, d={d}): {}+{} B/round", n * bytes, bytes));
    }
    verdict(ok, details.join(", "))
}

// 11. byte-identical CSVs across repeated runs
fn c11_determinism() -> Verdict {
    let configs = [
        r#"
        T = 300
        seeds = [4, 5]
        metrics_every = 7
        [problem]
        name = "noisy_quadratic"
        d = 9
        sigma = 1.0
        [algorithm]
        name = "ssvr"
        preset = "theorem1"
        "#,
        r#"
        T = 200
        seeds = [1]
        [problem]
        name = "nonconvex_logistic"
        d = 5
        n_samples = 30
        [algorithm]
        name = "ssvr_fs"
        preset = "theorem2"
        "#,
        r#"
        T = 150
        seeds = [2, 3]
        metrics_every = 3
        [problem]
        name = "heterogeneous_quadratic"
        d = 12
        n = 5
        heterogeneity = 1.0
        sigma = 0.3
        noise = "uniform"
        [algorithm]
        name = "ssvr_mv"
        preset = "theorem3"
        parallel = true
        "#,
    ];
    let mut ok = true;
    let mut files = 0;
    for text in configs {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let wa = run_and_write(&cfg, a.path(), RunOptions::default()).unwrap();
        let wb = run_and_write(
            &cfg,
            b.path(),
            RunOptions {
                jobs: 2,
                seed_offset: 0,
            },
        )
        .unwrap();
        for (pa, pb) in wa.iter().zip(&wb) {
            if pa.extension().is_some_and(|e| e == "csv") {
                files += 1;
                ok &= std::fs::read(pa).unwrap() == std::fs::read(pb).unwrap();
            }
        }
    }
    verdict(ok, format!("{files} CSV files compared byte for byte"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("stochastic sign unbiasedness", c1_stochastic_sign_unbiased),
        ("noiseless estimator exactness", c2_noiseless_exact),
        ("SVRG-oracle equivalence", c3_svrg_equivalence),
        ("variance reduction", c4_variance_reduction),
        ("rate exponent", c5_rate_exponent),
        ("full-gradient accounting", c6_full_gradient_count),
        ("vote-distribution exactness", c7_vote_distribution),
        ("estimator boundedness (option 1)", c8_boundedness),
        (
            "heterogeneity (option 2 vs sign baseline)",
            c9_heterogeneity,
        ),
        ("communication exactness", c10_communication),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
