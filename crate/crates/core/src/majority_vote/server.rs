use serde::{Deserialize, Serialize};

use super::wire::{BroadcastPayload, ServerBroadcast, WorkerMessage};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sign::{stochastic_sign, BitSignVector, SignVector};
use crate::vector::DenseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MvOption {
    /// Uplink `S_{4G}(v)`, downlink `Sign(mean)`.
    #[serde(rename = "1")]
    One,
    /// Uplink `S_G(Pi_G(v))`, downlink `S_1(mean)`.
    #[serde(rename = "2")]
    Two,
}

impl MvOption {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(MvOption::One),
            2 => Ok(MvOption::Two),
            _ => Err(Error::Unknown {
                kind: "majority-vote option",
                name: n.to_string(),
            }),
        }
    }
}

/// What a deterministic sign server broadcasts when the votes tie.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// Broadcast 0 on ties (2 bits per coordinate on the downlink).
    #[default]
    Ternary,
    /// Broadcast +1 on ties (strict 1-bit downlink).
    PlusOne,
}

/// Aggregation rule applied by the parameter server.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerRule {
    /// `Sign((1/n) sum votes)`, used by Option 1 and the double-sign baseline.
    Sign(TieMode),
    /// `S_1((1/n) sum votes)`, Option 2.
    StochasticSign,
}

impl ServerRule {
    pub fn for_option(option: MvOption, tie_mode: TieMode) -> Self {
        match option {
            MvOption::One => ServerRule::Sign(tie_mode),
            MvOption::Two => ServerRule::StochasticSign,
        }
    }

    /// Whether broadcasts under this rule use the ternary payload.
    pub fn ternary_downlink(&self) -> bool {
        matches!(self, ServerRule::Sign(TieMode::Ternary))
    }
}

/// Checks the round's messages are exactly one per node `0..n`, all for
/// `round` and of equal dimension, and returns them ordered by node id.
fn collect_round(messages: &[WorkerMessage], n: usize, round: u64) -> Result<Vec<&WorkerMessage>> {
    let protocol = |node: Option<u32>, detail: String| Error::Protocol {
        round,
        node,
        detail,
    };
    if n == 0 {
        return Err(protocol(None, "server configured with zero nodes".into()));
    }
    let mut slots: Vec<Option<&WorkerMessage>> = vec![None; n];
    let dim = messages.first().map(|m| m.payload.dim());
    for m in messages {
        let j = m.node_id as usize;
        if j >= n {
            return Err(protocol(Some(m.node_id), format!("unknown node (n = {n})")));
        }
        if m.round != round {
            return Err(protocol(
                Some(m.node_id),
                format!("message for round {}", m.round),
            ));
        }
        if Some(m.payload.dim()) != dim {
            return Err(protocol(
                Some(m.node_id),
                "payload dimension differs across nodes".into(),
            ));
        }
        if slots[j].replace(m).is_some() {
            return Err(protocol(Some(m.node_id), "duplicate message".into()));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(j, s)| s.ok_or_else(|| protocol(Some(j as u32), "missing message".into())))
        .collect()
}

/// Per-coordinate vote sums in node-id order.
fn vote_sums(ordered: &[&WorkerMessage]) -> Vec<i64> {
    let d = ordered[0].payload.dim();
    let mut sums = vec![0i64; d];
    for m in ordered {
        for (k, s) in sums.iter_mut().enumerate() {
            *s += m.payload.get(k) as i64;
        }
    }
    sums
}

/// Tallies one round of votes and produces the broadcast.
pub fn server_aggregate(
    messages: &[WorkerMessage],
    n: usize,
    round: u64,
    rule: ServerRule,
    rng: &mut RngStream,
) -> Result<ServerBroadcast> {
    let ordered = collect_round(messages, n, round)?;
    let sums = vote_sums(&ordered);
    let d = sums.len();
    let payload = match rule {
        ServerRule::Sign(TieMode::Ternary) => BroadcastPayload::Ternary(SignVector::new(
            sums.iter().map(|&s| s.signum() as i8).collect(),
        )?),
        ServerRule::Sign(TieMode::PlusOne) => {
            BroadcastPayload::Bits(BitSignVector::from_fn(d, |k| sums[k] >= 0))
        }
        ServerRule::StochasticSign => {
            // a mean of n values in {-1, +1} always lies in [-1, 1]
            let nf = n as f64;
            let mean = DenseVector::from_fn(d, |k| {
                debug_assert!(sums[k].unsigned_abs() as usize <= n);
                sums[k] as f64 / nf
            });
            BroadcastPayload::Bits(stochastic_sign(&mean, 1.0, rng)?)
        }
    };
    Ok(ServerBroadcast { round, payload })
}
