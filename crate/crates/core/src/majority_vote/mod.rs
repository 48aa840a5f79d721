//! Parameter-server simulation of sign-based majority vote with 1-bit
//! messages.
//!
//! Each round every node advances its own recursive-momentum estimator with
//! a single sample, compresses it to one bit per coordinate and sends it up.
//! The server tallies the votes and broadcasts a sign vector that every node
//! applies to its replica of `x`.
//!
//! * Option 1: uplink `S_R(v)` with `R = 4G`, downlink `Sign(mean)`.
//! * Option 2: uplink `S_G(Pi_G(v))`, downlink `S_1(mean)`.
//! * Baseline: uplink `sign(v)`, downlink `Sign(mean)`.
//!
//! Messages go through the real byte encoding in [`wire`] every round, and
//! the [`CommLedger`] counts those bytes.

mod node;
mod run;
mod server;
pub mod wire;

pub use node::{
    node_step, worker_encode_option1, worker_encode_option2, worker_encode_sign, NodeState,
};
pub use run::{baseline_mv_run, mv_run, preset_mv, MvConfig};
pub use server::{server_aggregate, MvOption, ServerRule, TieMode};
pub use wire::{BroadcastPayload, ServerBroadcast, WorkerMessage};

use serde::{Deserialize, Serialize};

/// Bytes moved in one round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTraffic {
    pub round: u64,
    /// Sum of worker payloads, headers excluded.
    pub uplink_payload: usize,
    pub uplink_framed: usize,
    /// One broadcast payload (the same frame reaches every node).
    pub downlink_payload: usize,
    pub downlink_framed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub rounds: Vec<RoundTraffic>,
}

impl CommLedger {
    pub fn record(&mut self, traffic: RoundTraffic) {
        self.rounds.push(traffic);
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total(&self) -> RoundTraffic {
        self.rounds
            .iter()
            .fold(RoundTraffic::default(), |acc, r| RoundTraffic {
                round: acc.round.max(r.round),
                uplink_payload: acc.uplink_payload + r.uplink_payload,
                uplink_framed: acc.uplink_framed + r.uplink_framed,
                downlink_payload: acc.downlink_payload + r.downlink_payload,
                downlink_framed: acc.downlink_framed + r.downlink_framed,
            })
    }
}
