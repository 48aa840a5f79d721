//! Frame layout shared by worker uplink and server broadcast messages:
//!
//! ```text
//! round    u64 LE
//! node_id  u32 LE   (0xFFFFFFFF for the server)
//! dim      u32 LE
//! payload  ceil(dim/8) bytes, or 2 * ceil(dim/8) for a ternary broadcast
//! ```

use crate::error::{Error, Result};
use crate::sign::{packed_len, BitSignVector, SignVector};

pub const HEADER_LEN: usize = 16;
pub const SERVER_NODE_ID: u32 = 0xFFFF_FFFF;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerMessage {
    pub round: u64,
    pub node_id: u32,
    pub payload: BitSignVector,
}

/// Downlink contents. Ternary broadcasts carry zeros from tied votes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BroadcastPayload {
    Ternary(SignVector),
    Bits(BitSignVector),
}

impl BroadcastPayload {
    pub fn dim(&self) -> usize {
        match self {
            BroadcastPayload::Ternary(s) => s.dim(),
            BroadcastPayload::Bits(b) => b.dim(),
        }
    }

    pub fn signs(&self) -> Vec<i8> {
        match self {
            BroadcastPayload::Ternary(s) => s.as_slice().to_vec(),
            BroadcastPayload::Bits(b) => b.decode(),
        }
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        match self {
            BroadcastPayload::Ternary(s) => s.encode_ternary(),
            BroadcastPayload::Bits(b) => b.as_bytes().to_vec(),
        }
    }

    pub fn payload_len(&self) -> usize {
        match self {
            BroadcastPayload::Ternary(s) => 2 * packed_len(s.dim()),
            BroadcastPayload::Bits(b) => packed_len(b.dim()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerBroadcast {
    pub round: u64,
    pub payload: BroadcastPayload,
}

fn write_header(out: &mut Vec<u8>, round: u64, node_id: u32, dim: usize) -> Result<()> {
    let dim =
        u32::try_from(dim).map_err(|_| Error::Wire(format!("dim {dim} does not fit in u32")))?;
    out.extend_from_slice(&round.to_le_bytes());
    out.extend_from_slice(&node_id.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    Ok(())
}

fn read_header(bytes: &[u8]) -> Result<(u64, u32, usize, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Wire(format!(
            "frame of {} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let round = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let node = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    Ok((round, node, dim, &bytes[HEADER_LEN..]))
}

impl WorkerMessage {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + packed_len(self.payload.dim()));
        write_header(&mut out, self.round, self.node_id, self.payload.dim())?;
        out.extend_from_slice(self.payload.as_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (round, node_id, dim, payload) = read_header(bytes)?;
        if node_id == SERVER_NODE_ID {
            return Err(Error::Wire(
                "worker frame carries the server node id".into(),
            ));
        }
        Ok(WorkerMessage {
            round,
            node_id,
            payload: BitSignVector::from_bytes(dim, payload)?,
        })
    }

    pub fn frame_len(&self) -> usize {
        HEADER_LEN + packed_len(self.payload.dim())
    }
}

impl ServerBroadcast {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.payload_len());
        write_header(&mut out, self.round, SERVER_NODE_ID, self.payload.dim())?;
        out.extend_from_slice(&self.payload.payload_bytes());
        Ok(out)
    }

    /// The frame does not say whether the payload is ternary; receivers know
    /// it from the run configuration.
    pub fn decode(bytes: &[u8], ternary: bool) -> Result<Self> {
        let (round, node_id, dim, payload) = read_header(bytes)?;
        if node_id != SERVER_NODE_ID {
            return Err(Error::Wire(format!(
                "broadcast frame has node id {node_id:#x}"
            )));
        }
        let payload = if ternary {
            BroadcastPayload::Ternary(SignVector::decode_ternary(dim, payload)?)
        } else {
            BroadcastPayload::Bits(BitSignVector::from_bytes(dim, payload)?)
        };
        Ok(ServerBroadcast { round, payload })
    }

    pub fn frame_len(&self) -> usize {
        HEADER_LEN + self.payload.payload_len()
    }
}
