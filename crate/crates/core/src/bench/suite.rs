//! Self-check suite behind `ssvr verify`.
//!
//! Each check compares a production code path against an independent
//! reference from [`crate::verify`] or a closed form.

use rand::Rng;
use serde::Serialize;

use crate::majority_vote::{
    mv_run, server_aggregate, MvConfig, MvOption, ServerRule, TieMode, WorkerMessage,
};
use crate::optimizers::{fs_estimator_update, ssvr_run, Snapshot, SsvrConfig};
use crate::oracles::{
    make_finite_sum_quadratic, make_noisy_quadratic, make_nonconvex_logistic,
    partition_heterogeneous, FiniteSumProblem, NoiseModel, PartitionSpec,
};
use crate::rng::RngStream;
use crate::sign::{stochastic_sign, BitSignVector};
use crate::vector::DenseVector;
use crate::verify::{
    enumerate_vote_distribution, finite_diff_grad, mc_expectation, svrg_reference_estimator,
};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: crate::Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome {
            name,
            passed,
            detail,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn stochastic_sign_unbiased() -> crate::Result<(bool, String)> {
    let v = DenseVector::new(vec![0.8, -0.3, 0.0, 1.5, -2.0])?;
    let radius = 2.0;
    let mut rng = RngStream::new(11, "suite/stochastic_sign");
    let (mean, se) = mc_expectation(
        |r| stochastic_sign(&v, radius, r).unwrap().to_dense(),
        200_000,
        &mut rng,
    )?;
    let worst = (0..v.dim())
        .map(|k| (mean[k] - v[k] / radius).abs() / se[k].max(1e-12))
        .fold(0.0, f64::max);
    Ok((
        worst <= 5.0,
        format!("max deviation {worst:.2} standard errors"),
    ))
}

fn codec_roundtrip() -> crate::Result<(bool, String)> {
    let mut rng = RngStream::new(12, "suite/codec");
    for d in 1..=257 {
        let signs: Vec<i8> = (0..d)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let packed = BitSignVector::encode(&signs)?;
        let back = BitSignVector::from_bytes(d, packed.as_bytes())?;
        if back.decode() != signs {
            return Ok((false, format!("mismatch at d = {d}")));
        }
    }
    Ok((true, "d = 1..=257".into()))
}

fn noiseless_storm_exact() -> crate::Result<(bool, String)> {
    let q = make_noisy_quadratic(10, 10.0, 0.0, 13)?;
    let cfg = SsvrConfig::new(200, 0.01, 0.3, 1, 1, 13);
    let run = ssvr_run(&q, &cfg)?;
    let err = run.summary.max_est_err_linf;
    Ok((err <= 1e-10, format!("max |v_t - grad f(x_t)| = {err:.2e}")))
}

fn svrg_collapse() -> crate::Result<(bool, String)> {
    let p = make_finite_sum_quadratic(6, 9, 14)?;
    let mut rng = RngStream::new(14, "suite/svrg");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let draw = |r: &mut RngStream| DenseVector::from_fn(6, |_| r.random_range(-2.0..2.0));
        let (x_t, x_prev, x_snap, v_prev) = (
            draw(&mut rng),
            draw(&mut rng),
            draw(&mut rng),
            draw(&mut rng),
        );
        let i = rng.random_range(0..p.num_components());
        let got = fs_estimator_update(
            &v_prev,
            &x_t,
            &x_prev,
            &Snapshot::take(&p, &x_snap),
            i,
            &p,
            1.0,
        )?;
        let want = svrg_reference_estimator(&p, &x_t, &x_snap, i)?;
        worst = worst.max(got.max_abs_diff(&want) / want.norm_linf().max(1.0));
    }
    Ok((
        worst <= 1e-12,
        format!("max relative difference {worst:.2e}"),
    ))
}

fn gradients_match_finite_differences() -> crate::Result<(bool, String)> {
    let quad = make_finite_sum_quadratic(5, 4, 15)?;
    let logi = make_nonconvex_logistic(5, 30, 0.1, 15)?;
    let mut rng = RngStream::new(15, "suite/fd");
    let mut worst = 0.0f64;
    for problem in [&quad as &dyn FiniteSumProblem, &logi] {
        for _ in 0..10 {
            let x = DenseVector::from_fn(5, |_| rng.random_range(-1.5..1.5));
            let fd = finite_diff_grad(|z| problem.loss(z), &x, 1e-6)?;
            let g = problem.full_grad(&x);
            worst = worst.max(g.max_abs_diff(&fd) / g.norm_linf().max(1.0));
        }
    }
    Ok((
        worst <= 1e-5,
        format!("max relative difference {worst:.2e}"),
    ))
}

fn vote_law_matches_enumeration() -> crate::Result<(bool, String)> {
    let radius = 1.0;
    let estimators = [vec![0.8, -0.2], vec![0.6, 0.1], vec![-0.4, -0.1]];
    let probs: Vec<Vec<f64>> = estimators
        .iter()
        .map(|v| v.iter().map(|x| 0.5 + x / (2.0 * radius)).collect())
        .collect();
    let law = enumerate_vote_distribution(&probs, MvOption::One, TieMode::Ternary)?;
    let vecs: Vec<DenseVector> = estimators
        .iter()
        .map(|v| DenseVector::new(v.clone()))
        .collect::<crate::Result<_>>()?;
    let mut rng = RngStream::new(16, "suite/vote");
    let draws = 100_000;
    let mut plus = [0usize; 2];
    for _ in 0..draws {
        let msgs: Vec<WorkerMessage> = vecs
            .iter()
            .enumerate()
            .map(|(j, v)| {
                Ok(WorkerMessage {
                    round: 1,
                    node_id: j as u32,
                    payload: stochastic_sign(v, radius, &mut rng)?,
                })
            })
            .collect::<crate::Result<_>>()?;
        let out = server_aggregate(&msgs, 3, 1, ServerRule::Sign(TieMode::Ternary), &mut rng)?;
        for (k, s) in out.payload.signs().iter().enumerate() {
            plus[k] += usize::from(*s == 1);
        }
    }
    let mut worst = 0.0f64;
    for (k, hits) in plus.iter().enumerate() {
        let p = law.p_plus(k);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        worst = worst.max((*hits as f64 / draws as f64 - p).abs() / se);
    }
    Ok((
        worst <= 5.0,
        format!("max deviation {worst:.2} standard errors"),
    ))
}

fn ledger_is_exact() -> crate::Result<(bool, String)> {
    let (d, n, t) = (13, 4, 25);
    let mut spec = PartitionSpec::new(d);
    spec.sigma = 0.1;
    spec.noise = NoiseModel::Uniform;
    spec.envelope_radius = 10.0;
    let part = partition_heterogeneous(&spec, n, 0.5, 17)?;
    let cfg = MvConfig::new(MvOption::Two, n, t, 0.01, 0.5, 17);
    let run = mv_run(&part, &cfg)?;
    let total = run.ledger.map(|l| l.total()).unwrap_or_default();
    let bytes = d.div_ceil(8);
    let ok = total.uplink_payload == t * n * bytes && total.downlink_payload == t * bytes;
    Ok((
        ok,
        format!(
            "uplink {} B, downlink {} B over {t} rounds",
            total.uplink_payload, total.downlink_payload
        ),
    ))
}

pub fn run_verify_suite() -> Vec<CheckOutcome> {
    vec![
        outcome("stochastic_sign_unbiased", stochastic_sign_unbiased()),
        outcome("bit_codec_roundtrip", codec_roundtrip()),
        outcome("noiseless_estimator_exact", noiseless_storm_exact()),
        outcome("svrg_collapse", svrg_collapse()),
        outcome(
            "finite_difference_gradients",
            gradients_match_finite_differences(),
        ),
        outcome("vote_law_enumeration", vote_law_matches_enumeration()),
        outcome("ledger_exact", ledger_is_exact()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_verify_suite() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
