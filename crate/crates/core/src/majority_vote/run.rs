use rayon::prelude::*;

use super::node::{
    node_step, worker_encode_option1, worker_encode_option2, worker_encode_sign, NodeState,
};
use super::server::{server_aggregate, MvOption, ServerRule, TieMode};
use super::wire::{ServerBroadcast, WorkerMessage};
use super::{CommLedger, RoundTraffic};
use crate::error::{Error, Result};
use crate::metrics::{guard_iterate, validate_stride, Observation, RunResult, Tracker};
use crate::optimizers::{PresetName, ScaleConstants};
use crate::oracles::{NodePartition, StochasticGradOracle};
use crate::rng::RngStream;
use crate::vector::DenseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct MvConfig {
    pub option: MvOption,
    /// Must match the partition's node count.
    pub nodes: usize,
    /// Rounds `T`; zero is allowed and leaves `x` untouched.
    pub iterations: usize,
    pub eta: f64,
    pub beta: f64,
    /// Gradient bound `G`. When absent it comes from the partition: the
    /// per-sample infinity-norm bound for Option 1, the l2 bound otherwise.
    pub g_bound: Option<f64>,
    pub tie_mode: TieMode,
    pub seed: u64,
    pub x0: Option<DenseVector>,
    pub metrics_every: usize,
    /// Run node computations on the rayon pool. Results are identical either
    /// way.
    pub parallel: bool,
}

impl MvConfig {
    pub fn new(
        option: MvOption,
        nodes: usize,
        iterations: usize,
        eta: f64,
        beta: f64,
        seed: u64,
    ) -> Self {
        MvConfig {
            option,
            nodes,
            iterations,
            eta,
            beta,
            g_bound: None,
            tie_mode: TieMode::Ternary,
            seed,
            x0: None,
            metrics_every: 1,
            parallel: false,
        }
    }

    /// `R = 4G` used by Option 1.
    pub fn radius(&self, g: f64) -> f64 {
        4.0 * g
    }

    fn validate(&self, partition: &NodePartition) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Config("nodes must be >= 1".into()));
        }
        if self.nodes != partition.num_nodes() {
            return Err(Error::Config(format!(
                "config has {} nodes but the partition has {}",
                self.nodes,
                partition.num_nodes()
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if let Some(g) = self.g_bound {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("G must be positive, got {g}")));
            }
        }
        validate_stride(self.metrics_every)
    }

    fn resolve_g(&self, partition: &NodePartition) -> Result<f64> {
        if let Some(g) = self.g_bound {
            return Ok(g);
        }
        match self.option {
            MvOption::One => partition.bound_g_linf_sample().ok_or_else(|| {
                Error::Config("Option 1 needs a per-sample gradient bound; the partition's noise is unbounded".into())
            }),
            MvOption::Two => Ok(partition.bound_g_l2()),
        }
    }
}

/// Majority-vote presets.
///
/// * theorem3 (Option 1): `beta = 1/2`, `eta = c / (T^1/2 d^1/2)`, `R = 4G`.
/// * theorem4 (Option 2): `beta = c T^-1/2`, `eta = c / (d^1/2 T^1/2)`.
pub fn preset_mv(
    name: PresetName,
    iterations: usize,
    d: usize,
    n: usize,
    g_bound: Option<f64>,
    scale: ScaleConstants,
) -> Result<MvConfig> {
    scale.validate()?;
    if iterations == 0 || d == 0 || n == 0 {
        return Err(Error::Config(
            "majority-vote preset requires T, d, n >= 1".into(),
        ));
    }
    let root = (iterations as f64).sqrt() * (d as f64).sqrt();
    let mut cfg = match name {
        PresetName::Theorem3 => {
            MvConfig::new(MvOption::One, n, iterations, scale.eta / root, 0.5, 0)
        }
        PresetName::Theorem4 => MvConfig::new(
            MvOption::Two,
            n,
            iterations,
            scale.eta / root,
            (scale.beta / (iterations as f64).sqrt()).min(1.0),
            0,
        ),
        other => {
            return Err(Error::Config(format!(
                "{other} is a centralized preset; use optimizers::preset"
            )))
        }
    };
    cfg.g_bound = g_bound;
    Ok(cfg)
}

#[derive(Clone, Copy)]
enum Uplink {
    Option1,
    Option2,
    Sign,
}

fn worker_round(
    node: &mut NodeState,
    oracle: &dyn StochasticGradOracle,
    beta: f64,
    uplink: Uplink,
    g: f64,
    round: u64,
) -> Result<Vec<u8>> {
    node_step(node, oracle, beta)?;
    let msg = match uplink {
        Uplink::Option1 => worker_encode_option1(node, g, round)?,
        Uplink::Option2 => worker_encode_option2(node, g, round)?,
        Uplink::Sign => worker_encode_sign(node, round)?,
    };
    msg.encode()
}

fn simulate(
    partition: &NodePartition,
    cfg: &MvConfig,
    uplink: Uplink,
    rule: ServerRule,
    label: &str,
) -> Result<RunResult> {
    cfg.validate(partition)?;
    let g = cfg.resolve_g(partition)?;
    let d = partition.dim();
    let n = partition.num_nodes();
    let root = RngStream::new(cfg.seed, label);
    let mut server_rng = root.fork("server");
    let mut tracker = Tracker::new(cfg.iterations, cfg.metrics_every, root.fork("select"));
    let x1 = crate::optimizers::initial_point(&cfg.x0, d)?;
    let node_root = root.fork("nodes");
    let mut nodes: Vec<NodeState> = (0..n)
        .map(|j| NodeState::new(j as u32, x1.clone(), node_root.fork_index(j as u64)))
        .collect();
    let mut ledger = CommLedger::default();
    let ternary = rule.ternary_downlink();

    for t in 1..=cfg.iterations {
        let round = t as u64;
        let with_ctx = |j: usize, e: Error| match e {
            e @ Error::Protocol { .. } => e,
            other => Error::Protocol {
                round,
                node: Some(j as u32),
                detail: other.to_string(),
            },
        };
        let frames: Vec<Vec<u8>> = if cfg.parallel {
            nodes
                .par_iter_mut()
                .enumerate()
                .map(|(j, node)| {
                    worker_round(node, partition.node_oracle(j), cfg.beta, uplink, g, round)
                        .map_err(|e| with_ctx(j, e))
                })
                .collect::<Result<_>>()?
        } else {
            nodes
                .iter_mut()
                .enumerate()
                .map(|(j, node)| {
                    worker_round(node, partition.node_oracle(j), cfg.beta, uplink, g, round)
                        .map_err(|e| with_ctx(j, e))
                })
                .collect::<Result<_>>()?
        };

        let messages = frames
            .iter()
            .map(|f| WorkerMessage::decode(f))
            .collect::<Result<Vec<_>>>()?;
        let broadcast = server_aggregate(&messages, n, round, rule, &mut server_rng)?;
        let down = broadcast.encode()?;
        let uplink_framed: usize = frames.iter().map(Vec::len).sum();
        let traffic = RoundTraffic {
            round,
            uplink_payload: messages.iter().map(|m| m.payload.as_bytes().len()).sum(),
            uplink_framed,
            downlink_payload: broadcast.payload.payload_len(),
            downlink_framed: down.len(),
        };

        // metrics at x_t, before the broadcast is applied
        let x = &nodes[0].x;
        let grad = partition.global_grad_true(x);
        let mut err_sq = 0.0;
        let mut err_inf: f64 = 0.0;
        for (j, node) in nodes.iter().enumerate() {
            let diff = node.estimator()?.sub(&partition.node(j).grad_true(x));
            let l2 = diff.norm_l2();
            err_sq += l2 * l2 / n as f64;
            err_inf = err_inf.max(diff.norm_linf());
        }
        tracker.observe(Observation {
            t,
            x,
            loss: partition.global_loss(x),
            grad: &grad,
            est_err_sq: err_sq,
            est_err_linf: err_inf,
            bits_up: 8 * traffic.uplink_payload as u64,
            bits_down: 8 * traffic.downlink_payload as u64,
            envelope_ok: partition.in_envelope(x),
        });
        ledger.record(traffic);

        for node in nodes.iter_mut() {
            let received = ServerBroadcast::decode(&down, ternary)?;
            let signs = received.payload.signs();
            for (xk, s) in node.x.as_mut_slice().iter_mut().zip(&signs) {
                *xk -= cfg.eta * *s as f64;
            }
        }
        let reference = nodes[0].x.clone();
        if let Some(node) = nodes.iter().find(|s| s.x != reference) {
            return Err(Error::Protocol {
                round,
                node: Some(node.node_id),
                detail: "replica of x diverged from node 0".into(),
            });
        }
        guard_iterate(t, &reference)?;
    }

    let x_final = nodes.swap_remove(0).x;
    let mut result = tracker.finish(x1, x_final, 0, 2 * n * cfg.iterations);
    result.ledger = Some(ledger);
    Ok(result)
}

/// Runs Option 1 or Option 2 of the sign-based majority vote with
/// recursive-momentum node estimators.
pub fn mv_run(partition: &NodePartition, cfg: &MvConfig) -> Result<RunResult> {
    let uplink = match cfg.option {
        MvOption::One => Uplink::Option1,
        MvOption::Two => Uplink::Option2,
    };
    simulate(
        partition,
        cfg,
        uplink,
        ServerRule::for_option(cfg.option, cfg.tie_mode),
        "ssvr_mv",
    )
}

/// Deterministic double-sign majority vote, `x -= eta Sign(mean_j sign(v_j))`.
/// `cfg.option` is ignored.
pub fn baseline_mv_run(partition: &NodePartition, cfg: &MvConfig) -> Result<RunResult> {
    let mut cfg = cfg.clone();
    // the baseline never uses G
    cfg.g_bound.get_or_insert(1.0);
    simulate(
        partition,
        &cfg,
        Uplink::Sign,
        ServerRule::Sign(cfg.tie_mode),
        "sign_mv",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{signsgd_run, BaselineConfig};
    use crate::oracles::{partition_heterogeneous, sign_conflict_pair, NoiseModel, PartitionSpec};
    use crate::sign::packed_len;

    fn spec(d: usize, sigma: f64, noise: NoiseModel) -> PartitionSpec {
        PartitionSpec {
            d,
            condition_number: 4.0,
            sigma,
            noise,
            envelope_radius: 3.0,
        }
    }

    #[test]
    fn presets() {
        let c = preset_mv(
            PresetName::Theorem3,
            10_000,
            100,
            5,
            Some(2.0),
            ScaleConstants::default(),
        )
        .unwrap();
        assert_eq!(c.option, MvOption::One);
        assert_eq!(c.beta, 0.5);
        assert!((c.eta - 0.001).abs() < 1e-15);
        assert_eq!(c.radius(2.0), 8.0);
        let c = preset_mv(
            PresetName::Theorem4,
            10_000,
            100,
            5,
            None,
            ScaleConstants::default(),
        )
        .unwrap();
        assert_eq!(c.option, MvOption::Two);
        assert!((c.beta - 0.01).abs() < 1e-15 && (c.eta - 0.001).abs() < 1e-15);
        assert!(preset_mv(
            PresetName::Theorem1,
            10,
            2,
            2,
            None,
            ScaleConstants::default()
        )
        .is_err());
    }

    #[test]
    fn zero_rounds_leave_x_unchanged() {
        let p = partition_heterogeneous(&spec(4, 0.0, NoiseModel::Gaussian), 3, 1.0, 1).unwrap();
        let mut cfg = MvConfig::new(MvOption::Two, 3, 0, 0.1, 0.5, 0);
        cfg.x0 = Some(DenseVector::filled(4, 0.25));
        let r = mv_run(&p, &cfg).unwrap();
        assert_eq!(r.x_final, DenseVector::filled(4, 0.25));
        assert!(r.ledger.unwrap().is_empty());
        assert!(r.rows.is_empty());
    }

    #[test]
    fn option2_ledger_is_exact() {
        let p = partition_heterogeneous(&spec(13, 0.5, NoiseModel::Gaussian), 3, 1.0, 2).unwrap();
        let r = mv_run(&p, &MvConfig::new(MvOption::Two, 3, 20, 0.01, 0.2, 5)).unwrap();
        let ledger = r.ledger.unwrap();
        assert_eq!(ledger.rounds.len(), 20);
        for t in &ledger.rounds {
            assert_eq!(t.uplink_payload, 3 * packed_len(13));
            assert_eq!(t.downlink_payload, packed_len(13));
            assert_eq!(t.uplink_framed, 3 * (16 + 2));
            assert_eq!(t.downlink_framed, 16 + 2);
        }
        assert_eq!(r.rows[0].bits_up, 48);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let p = partition_heterogeneous(&spec(6, 1.0, NoiseModel::Uniform), 5, 1.0, 3).unwrap();
        for option in [MvOption::One, MvOption::Two] {
            let mut cfg = MvConfig::new(option, 5, 200, 0.01, 0.5, 7);
            let a = mv_run(&p, &cfg).unwrap();
            cfg.parallel = true;
            let b = mv_run(&p, &cfg).unwrap();
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.x_final, b.x_final);
            assert_eq!(a.tau_out, b.tau_out);
        }
    }

    #[test]
    fn option1_requires_bounded_noise() {
        let p = partition_heterogeneous(&spec(3, 1.0, NoiseModel::Gaussian), 2, 1.0, 4).unwrap();
        let cfg = MvConfig::new(MvOption::One, 2, 5, 0.01, 0.5, 0);
        assert!(matches!(mv_run(&p, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn option1_bound_violation_is_reported_with_context() {
        let p = partition_heterogeneous(&spec(3, 0.0, NoiseModel::Gaussian), 2, 1.0, 4).unwrap();
        let mut cfg = MvConfig::new(MvOption::One, 2, 5, 0.01, 0.5, 0);
        cfg.g_bound = Some(1e-3);
        cfg.x0 = Some(DenseVector::filled(3, 10.0));
        match mv_run(&p, &cfg) {
            Err(Error::Protocol {
                round: 1,
                node: Some(0),
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn node_count_must_match() {
        let p = sign_conflict_pair(2, 1.0).unwrap();
        assert!(mv_run(&p, &MvConfig::new(MvOption::Two, 3, 5, 0.1, 0.5, 0)).is_err());
    }

    #[test]
    fn homogeneous_noiseless_baseline_matches_signsgd() {
        let p = partition_heterogeneous(&spec(5, 0.0, NoiseModel::Gaussian), 4, 0.0, 9).unwrap();
        let x0 = DenseVector::from_fn(5, |k| 0.3 * k as f64 - 0.5);
        let mut cfg = MvConfig::new(MvOption::One, 4, 150, 0.02, 1.0, 1);
        cfg.x0 = Some(x0.clone());
        let mv = baseline_mv_run(&p, &cfg).unwrap();
        let mut bcfg = BaselineConfig::new(150, 0.02, 1, 1);
        bcfg.x0 = Some(x0);
        let central = signsgd_run(p.node(0), &bcfg).unwrap();
        assert_eq!(mv.x_final, central.x_final);
    }

    #[test]
    fn odd_node_count_never_ties() {
        let p = partition_heterogeneous(&spec(7, 1.0, NoiseModel::Gaussian), 5, 2.0, 2).unwrap();
        let r = baseline_mv_run(&p, &MvConfig::new(MvOption::One, 5, 100, 0.01, 1.0, 3)).unwrap();
        // a ternary broadcast with no zeros moves every coordinate by eta each round
        let x = &r.x_final;
        for k in 0..7 {
            let steps = (x[k] / 0.01).round();
            assert!((x[k] - steps * 0.01).abs() < 1e-9);
            assert_eq!(
                (steps as i64).rem_euclid(2),
                0,
                "100 unit moves keep parity even"
            );
        }
    }

    #[test]
    fn conflict_instance_stalls_baseline() {
        let p = sign_conflict_pair(2, 2.0).unwrap();
        let mut cfg = MvConfig::new(MvOption::One, 2, 500, 0.01, 1.0, 0);
        cfg.x0 = Some(DenseVector::new(vec![0.5, 0.3]).unwrap());
        let r = baseline_mv_run(&p, &cfg).unwrap();
        assert_eq!(r.x_final[0], 0.5);
        assert!(r.x_final[1].abs() <= 0.01 + 1e-12);
    }
}
