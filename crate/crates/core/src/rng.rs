//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the 64-bit seed and
//! addressed by a 64-bit stream id. Forking derives the child id from the
//! parent id and a label, so the draws a node or purpose sees never depend on
//! what other streams consumed or in which order threads ran.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

const LABEL_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const LABEL_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the label bytes; stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(LABEL_BASIS, |h, b| (h ^ b as u64).wrapping_mul(LABEL_PRIME))
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    /// Root stream for `(seed, label)`.
    pub fn new(seed: u64, label: &str) -> Self {
        Self::with_stream_id(seed, mix64(label_hash(label)))
    }

    pub fn with_stream_id(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream determined only by this stream's identity and `label`.
    /// The parent's position is not consumed or consulted.
    pub fn fork(&self, label: &str) -> RngStream {
        let id =
            mix64(self.stream_id ^ mix64(label_hash(label).wrapping_add(0x9e37_79b9_7f4a_7c15)));
        RngStream::with_stream_id(self.seed, id)
    }

    /// Child stream for an integer index (node id, seed replica, ...).
    pub fn fork_index(&self, index: u64) -> RngStream {
        let id = mix64(
            self.stream_id
                .wrapping_add(mix64(index ^ 0xd1b5_4a32_d192_ed03)),
        );
        RngStream::with_stream_id(self.seed, id)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(r: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| r.next_u64()).collect()
    }

    #[test]
    fn same_identity_same_sequence() {
        let mut a = RngStream::new(42, "node");
        let mut b = RngStream::new(42, "node");
        assert_eq!(draws(&mut a, 64), draws(&mut b, 64));
        let mut c = a.fork_index(3);
        let mut d = b.fork_index(3);
        assert_eq!(draws(&mut c, 16), draws(&mut d, 16));
    }

    #[test]
    fn distinct_labels_and_seeds_differ() {
        let mut a = RngStream::new(42, "node");
        let mut b = RngStream::new(42, "server");
        let mut c = RngStream::new(43, "node");
        let xa = draws(&mut a, 8);
        assert_ne!(xa, draws(&mut b, 8));
        assert_ne!(xa, draws(&mut c, 8));
    }

    #[test]
    fn fork_ignores_parent_position() {
        let root = RngStream::new(1, "root");
        let mut advanced = root.clone();
        let _ = draws(&mut advanced, 100);
        let mut f1 = root.fork("samples");
        let mut f2 = advanced.fork("samples");
        assert_eq!(draws(&mut f1, 8), draws(&mut f2, 8));
    }

    #[test]
    fn sibling_streams_look_independent() {
        let root = RngStream::new(9, "root");
        let n = 100_000;
        let mut a = root.fork_index(0);
        let mut b = root.fork_index(1);
        let (mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = a.random::<f64>() - 0.5;
            let y: f64 = b.random::<f64>() - 0.5;
            sab += x * y;
            sa += x;
            sb += y;
        }
        let nf = n as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        // var(U - 1/2) = 1/12, so sd of the product mean is ~ 1/(12 sqrt(n)).
        assert!(cov.abs() < 4.0 / (12.0 * nf.sqrt()), "cov = {cov}");
    }

    #[test]
    fn thread_schedule_does_not_change_draws() {
        let root = RngStream::new(77, "threads");
        let serial: Vec<Vec<u64>> = (0..8).map(|j| draws(&mut root.fork_index(j), 32)).collect();
        let handles: Vec<_> = (0..8u64)
            .rev()
            .map(|j| {
                let r = root.clone();
                std::thread::spawn(move || (j, draws(&mut r.fork_index(j), 32)))
            })
            .collect();
        for h in handles {
            let (j, d) = h.join().unwrap();
            assert_eq!(d, serial[j as usize]);
        }
    }
}
