use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::legendre::orthonormal_legendre_all;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent tuple addressing one tensor-product basis polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MultiIndex {
    entries: Vec<usize>,
    degree: usize,
}

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("multi-index needs at least one dimension"));
        }
        let degree = entries.iter().sum();
        Ok(Self { entries, degree })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            entries: vec![0; dim.max(1)],
            degree: 0,
        }
    }

    /// `n * e^j`: degree `n` concentrated in dimension `j`.
    pub fn axis(dim: usize, j: usize, n: usize) -> Self {
        let mut entries = vec![0; dim];
        entries[j] = n;
        Self { entries, degree: n }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Total degree `|i|`.
    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl TryFrom<Vec<usize>> for MultiIndex {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MultiIndex> for Vec<usize> {
    fn from(m: MultiIndex) -> Self {
        m.entries
    }
}

/// `C(n + d, d)`, the number of multi-indices of total degree at most `n`.
pub fn index_count(dim: usize, order: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=dim as u128 {
        c = c * (order as u128 + k) / k;
    }
    c as usize
}

/// All multi-indices with `|i| <= order`, graded by total degree and, within a
/// degree, in descending lexicographic order: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`.
///
/// The indices of degree at most `n0 < order` form a prefix of the list.
pub fn multi_index_set(dim: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(index_count(dim, order));
    let mut buf = vec![0; dim];
    for degree in 0..=order {
        compositions(degree, 0, &mut buf, &mut out);
    }
    out
}

fn compositions(remaining: usize, pos: usize, buf: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(MultiIndex {
            entries: buf.clone(),
            degree: buf.iter().sum(),
        });
        return;
    }
    for first in (0..=remaining).rev() {
        buf[pos] = first;
        compositions(remaining - first, pos + 1, buf, out);
    }
}

/// `prod_d orthonormal_legendre(i_d, x_d)`.
pub fn tensor_basis_eval<T: Scalar>(index: &MultiIndex, x: &[T]) -> Result<T> {
    if index.dim() != x.len() {
        return Err(Error::invalid(format!(
            "multi-index has dimension {} but point has {}",
            index.dim(),
            x.len()
        )));
    }
    let mut buf = Vec::new();
    let mut value = T::one();
    for (&n, &xd) in index.entries().iter().zip(x) {
        buf.resize(n + 1, T::zero());
        orthonormal_legendre_all(xd, &mut buf);
        value = value * buf[n];
    }
    Ok(value)
}

/// Total-degree index set with a position lookup, used as the coefficient
/// layout of every expansion of a given dimension and order.
#[derive(Debug, Clone)]
pub struct IndexSet {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl IndexSet {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least one"));
        }
        let indices = multi_index_set(dim, order);
        let positions = indices.iter().cloned().enumerate().map(|(k, m)| (m, k)).collect();
        Ok(Self {
            dim,
            order,
            indices,
            positions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Number of leading indices with degree at most `order`.
    pub fn prefix_len(&self, order: usize) -> usize {
        index_count(self.dim, order.min(self.order))
    }

    /// Positions of the indices of exactly the top degree.
    pub fn top_degree(&self) -> std::ops::Range<usize> {
        let start = if self.order == 0 {
            0
        } else {
            self.prefix_len(self.order - 1)
        };
        start..self.len()
    }

    /// Evaluates every basis polynomial at the reference point `x` into `out`.
    pub fn eval_basis<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.len());
        let n = self.order + 1;
        if self.dim == 1 {
            orthonormal_legendre_all(x[0], out);
            return;
        }
        let mut table = vec![T::zero(); n * self.dim];
        for (d, &xd) in x.iter().enumerate() {
            orthonormal_legendre_all(xd, &mut table[d * n..(d + 1) * n]);
        }
        for (slot, idx) in out.iter_mut().zip(&self.indices) {
            *slot = idx
                .entries()
                .iter()
                .enumerate()
                .fold(T::one(), |acc, (d, &k)| acc * table[d * n + k]);
        }
    }
}
