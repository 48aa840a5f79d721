//! Dense real vectors, norms and the Euclidean-ball projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty real vector.
///
/// Constructors reject NaN and infinite entries. In-place arithmetic does not
/// re-check; callers that may overflow use [`DenseVector::ensure_finite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("vector must have dim >= 1".into()));
        }
        let v = DenseVector(values);
        v.ensure_finite()?;
        Ok(v)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector must have dim >= 1");
        DenseVector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim >= 1, "vector must have dim >= 1");
        DenseVector(vec![value; dim])
    }

    /// Standard basis vector `e_k` scaled by `scale`.
    pub fn basis(dim: usize, k: usize, scale: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = scale;
        v
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(dim >= 1, "vector must have dim >= 1");
        DenseVector((0..dim).map(f).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.0.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::InvalidInput(format!(
                "non-finite entry {} at coordinate {k}",
                self.0[k]
            ))),
        }
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                expected,
                got: self.dim(),
            })
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|a| a * alpha).collect())
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), other.dim());
        DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), other.dim());
        DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn dist_sq(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm_l1(&self) -> f64 {
        norm_l1(self)
    }

    pub fn norm_l2(&self) -> f64 {
        norm_l2(self)
    }

    pub fn norm_linf(&self) -> f64 {
        norm_linf(self)
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        DenseVector::new(values)
    }
}

pub fn norm_l1(v: &DenseVector) -> f64 {
    v.0.iter().map(|x| x.abs()).sum()
}

/// Euclidean norm, scaled to avoid overflow for large entries.
pub fn norm_l2(v: &DenseVector) -> f64 {
    let scale = norm_linf(v);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v.0.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

pub fn norm_linf(v: &DenseVector) -> f64 {
    v.0.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Projection onto the closed Euclidean ball of radius `radius` centred at 0.
pub fn project_l2(v: &DenseVector, radius: f64) -> Result<DenseVector> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "projection radius must be positive and finite, got {radius}"
        )));
    }
    v.ensure_finite()?;
    let norm = norm_l2(v);
    if norm <= radius {
        return Ok(v.clone());
    }
    let mut out = v.scaled(radius / norm);
    // Rounding in the rescale can leave the norm a few ulps above the radius.
    let after = norm_l2(&out);
    if after > radius {
        out.scale(radius / after * (1.0 - f64::EPSILON));
    }
    Ok(out)
}
