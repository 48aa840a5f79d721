//! Sign operators and the packed 1-bit sign encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::{norm_linf, DenseVector};

/// Ternary sign vector with entries in `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sign vector must have dim >= 1".into()));
        }
        if let Some(k) = values.iter().position(|s| !(-1..=1).contains(s)) {
            return Err(Error::InvalidInput(format!(
                "sign entry {} at coordinate {k} not in {{-1, 0, 1}}",
                values[k]
            )));
        }
        Ok(SignVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn to_dense(&self) -> DenseVector {
        DenseVector::from_fn(self.dim(), |k| self.0[k] as f64)
    }

    pub fn count_zeros(&self) -> usize {
        self.0.iter().filter(|&&s| s == 0).count()
    }

    /// Two bit-planes of `ceil(d/8)` bytes each: a nonzero mask followed by
    /// sign bits (1 = +1). Sign bits of zero coordinates are 0.
    pub fn encode_ternary(&self) -> Vec<u8> {
        let nbytes = packed_len(self.dim());
        let mut out = vec![0u8; 2 * nbytes];
        for (k, &s) in self.0.iter().enumerate() {
            if s != 0 {
                out[k / 8] |= 1 << (k % 8);
            }
            if s > 0 {
                out[nbytes + k / 8] |= 1 << (k % 8);
            }
        }
        out
    }

    pub fn decode_ternary(dim: usize, bytes: &[u8]) -> Result<Self> {
        let nbytes = packed_len(dim);
        if dim == 0 || bytes.len() != 2 * nbytes {
            return Err(Error::Wire(format!(
                "ternary payload for dim {dim} must be {} bytes, got {}",
                2 * nbytes,
                bytes.len()
            )));
        }
        let (mask, signs) = bytes.split_at(nbytes);
        check_pad(dim, mask)?;
        check_pad(dim, signs)?;
        let mut values = Vec::with_capacity(dim);
        for k in 0..dim {
            let nz = mask[k / 8] >> (k % 8) & 1 == 1;
            let pos = signs[k / 8] >> (k % 8) & 1 == 1;
            values.push(match (nz, pos) {
                (false, false) => 0,
                (true, true) => 1,
                (true, false) => -1,
                (false, true) => {
                    return Err(Error::Wire(format!("sign bit set on zero coordinate {k}")))
                }
            });
        }
        Ok(SignVector(values))
    }
}

/// Strict `±1` vector packed one bit per coordinate.
///
/// Coordinate `k` lives at byte `k / 8`, bit `k % 8` (LSB first); bit 1 is
/// `+1`, bit 0 is `-1`. Pad bits in the last byte are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitSignVector {
    dim: usize,
    bits: Vec<u8>,
}

pub const fn packed_len(dim: usize) -> usize {
    dim.div_ceil(8)
}

fn check_pad(dim: usize, bytes: &[u8]) -> Result<()> {
    let used = dim % 8;
    if used != 0 {
        let last = bytes[bytes.len() - 1];
        if last >> used != 0 {
            return Err(Error::Wire(format!(
                "nonzero pad bits in final byte {last:#04x}"
            )));
        }
    }
    Ok(())
}

impl BitSignVector {
    pub fn from_fn(dim: usize, mut positive: impl FnMut(usize) -> bool) -> Self {
        assert!(dim >= 1, "sign vector must have dim >= 1");
        let mut bits = vec![0u8; packed_len(dim)];
        for k in 0..dim {
            if positive(k) {
                bits[k / 8] |= 1 << (k % 8);
            }
        }
        BitSignVector { dim, bits }
    }

    /// Packs a `±1` slice; zero or any other value is rejected.
    pub fn encode(signs: &[i8]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidInput("sign vector must have dim >= 1".into()));
        }
        if let Some(k) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput(format!(
                "1-bit encoding requires +-1, got {} at coordinate {k}",
                signs[k]
            )));
        }
        Ok(Self::from_fn(signs.len(), |k| signs[k] == 1))
    }

    pub fn decode(&self) -> Vec<i8> {
        (0..self.dim).map(|k| self.get(k)).collect()
    }

    pub fn from_bytes(dim: usize, bytes: &[u8]) -> Result<Self> {
        if dim == 0 || bytes.len() != packed_len(dim) {
            return Err(Error::Wire(format!(
                "payload for dim {dim} must be {} bytes, got {}",
                packed_len(dim),
                bytes.len()
            )));
        }
        check_pad(dim, bytes)?;
        Ok(BitSignVector {
            dim,
            bits: bytes.to_vec(),
        })
    }

    #[inline]
    pub fn get(&self, k: usize) -> i8 {
        if self.bits[k / 8] >> (k % 8) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn to_dense(&self) -> DenseVector {
        DenseVector::from_fn(self.dim, |k| self.get(k) as f64)
    }

    pub fn to_sign_vector(&self) -> SignVector {
        SignVector(self.decode())
    }
}

/// Elementwise sign with `sign(0) = 0`.
pub fn sign(v: &DenseVector) -> Result<SignVector> {
    v.ensure_finite()?;
    Ok(SignVector(
        v.iter()
            .map(|&x| {
                if x > 0.0 {
                    1
                } else if x < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect(),
    ))
}

/// Elementwise sign resolved to `±1`, with zero mapped to `+1`.
pub fn sign_bit(v: &DenseVector) -> Result<BitSignVector> {
    v.ensure_finite()?;
    let s = v.as_slice();
    Ok(BitSignVector::from_fn(v.dim(), |k| s[k] >= 0.0))
}

/// Randomized sign `S_R`: coordinate `k` is `+1` with probability
/// `1/2 + v_k / (2R)`, independently, so `E[out] = v / R`.
///
/// Requires `||v||_inf <= R`; anything outside is a [`Error::Domain`], never
/// clamped.
pub fn stochastic_sign(v: &DenseVector, radius: f64, rng: &mut RngStream) -> Result<BitSignVector> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "stochastic sign radius must be positive and finite, got {radius}"
        )));
    }
    v.ensure_finite()?;
    let norm = norm_linf(v);
    if norm > radius {
        return Err(Error::Domain { norm, radius });
    }
    let s = v.as_slice();
    Ok(BitSignVector::from_fn(v.dim(), |k| {
        let p = 0.5 + 0.5 * (s[k] / radius);
        rng.random::<f64>() < p
    }))
}
