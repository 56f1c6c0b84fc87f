//! Sparse nonnegative feature vectors.

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Builds a vector from `(index, value)` pairs. Pairs must be sorted by
    /// index without duplicates; zero values are dropped.
    pub fn from_sorted(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, v) in pairs {
            if let Some(&last) = indices.last() {
                if i <= last {
                    return Err(Error::Contract(format!(
                        "sparse indices must be strictly increasing ({last} then {i})"
                    )));
                }
            }
            if !v.is_finite() {
                return Err(Error::Contract(format!("non-finite value at index {i}")));
            }
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(SparseVec { indices, values })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let mut sum = 0.0;
        merge(self, other, |a, b| sum += a * b);
        sum
    }

    /// Returns `(|self - other|², |self + other|²)` accumulated in index order.
    pub fn diff_sum_sq(&self, other: &SparseVec) -> (f64, f64) {
        let mut diff = 0.0;
        let mut plus = 0.0;
        merge(self, other, |a, b| {
            diff += (a - b) * (a - b);
            plus += (a + b) * (a + b);
        });
        (diff, plus)
    }

    pub fn supports_overlap(&self, other: &SparseVec) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn scale(&self, factor: f64) -> SparseVec {
        SparseVec {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Visits the union of supports in index order, passing 0 for absent entries.
fn merge(a: &SparseVec, b: &SparseVec, mut f: impl FnMut(f64, f64)) {
    let (mut i, mut j) = (0, 0);
    while i < a.indices.len() || j < b.indices.len() {
        let ai = a.indices.get(i).copied().unwrap_or(u32::MAX);
        let bj = b.indices.get(j).copied().unwrap_or(u32::MAX);
        if ai == bj {
            f(a.values[i], b.values[j]);
            i += 1;
            j += 1;
        } else if ai < bj {
            f(a.values[i], 0.0);
            i += 1;
        } else {
            f(0.0, b.values[j]);
            j += 1;
        }
    }
}

/// A nonnegative sparse vector of Euclidean length one.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(SparseVec);

impl UnitVector {
    /// Divides by the Euclidean norm. Returns `None` for the zero vector.
    pub fn normalize(v: &SparseVec) -> Option<UnitVector> {
        let norm = v.norm();
        if norm == 0.0 {
            return None;
        }
        Some(UnitVector(SparseVec {
            indices: v.indices.clone(),
            values: v.values.iter().map(|x| x / norm).collect(),
        }))
    }

    /// Wraps a vector that is already of unit length.
    pub fn try_from_unit(v: SparseVec, tolerance: f64) -> Result<UnitVector> {
        let norm = v.norm();
        if (norm - 1.0).abs() > tolerance {
            return Err(Error::Contract(format!("expected a unit vector, norm is {norm}")));
        }
        if v.values.iter().any(|&x| x < 0.0) {
            return Err(Error::Contract("unit vector has a negative coordinate".into()));
        }
        Ok(UnitVector(v))
    }

    pub fn as_sparse(&self) -> &SparseVec {
        &self.0
    }
}
