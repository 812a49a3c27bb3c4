//! Hypercube decomposition of the standardized random domain `[-1, 1]^d`,
//! element probabilities under the uniform density, affine reference maps and
//! seeded sampling.
//!
//! Elements are half-open boxes `prod [a_d, b_d)`. A box whose upper bound in
//! some dimension equals the domain edge `1` is closed there, so every point of
//! the closed domain belongs to exactly one element.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    prob: T,
}

impl<T: Scalar> Element<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "element bounds must be nonempty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for d in 0..lower.len() {
            if !(lower[d] >= -T::one() && upper[d] <= T::one()) {
                return Err(Error::invalid(format!(
                    "element bounds leave the domain in dimension {d}"
                )));
            }
        }
        let prob = box_probability(&lower, &upper)?;
        Ok(Self { lower, upper, prob })
    }

    /// Takes stored bounds and mass as-is; use [`Decomposition::check_partition`]
    /// to inspect the result.
    pub fn from_parts_unchecked(lower: Vec<T>, upper: Vec<T>, prob: T) -> Self {
        Self { lower, upper, prob }
    }

    /// The whole domain `[-1, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![-T::one(); dim],
            upper: vec![T::one(); dim],
            prob: T::one(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Probability mass `J^k` of the box under the uniform density.
    pub fn prob(&self) -> T {
        self.prob
    }

    pub fn contains(&self, z: &[T]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&x, &a), &b)| x >= a && (x < b || (x == b && b == T::one())))
    }

    /// Affine map from the box to the reference cube.
    pub fn to_local(&self, z: &[T]) -> Result<Vec<T>> {
        if !self.contains(z) {
            return Err(Error::invalid(format!(
                "point {:?} is outside element {:?}..{:?}",
                z, self.lower, self.upper
            )));
        }
        let mut out = vec![T::zero(); z.len()];
        self.to_local_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn to_local_into(&self, z: &[T], out: &mut [T]) {
        for d in 0..z.len() {
            let (a, b) = (self.lower[d], self.upper[d]);
            out[d] = (z[d] + z[d] - (a + b)) / (b - a);
        }
    }

    /// Affine map from the reference cube onto the box.
    pub fn to_global(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() || x.iter().any(|v| v.abs() > T::one()) {
            return Err(Error::invalid(format!(
                "reference point {x:?} is outside [-1, 1]^{}",
                self.dim()
            )));
        }
        let mut out = vec![T::zero(); x.len()];
        self.to_global_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn to_global_into(&self, x: &[T], out: &mut [T]) {
        let half = T::of(0.5);
        for d in 0..x.len() {
            let (a, b) = (self.lower[d], self.upper[d]);
            out[d] = a + (x[d] + T::one()) * (b - a) * half;
        }
    }

    fn overlaps(&self, other: &Self) -> bool {
        (0..self.dim()).all(|d| self.lower[d] < other.upper[d] && other.lower[d] < self.upper[d])
    }
}

fn box_probability<T: Scalar>(lower: &[T], upper: &[T]) -> Result<T> {
    let half = T::of(0.5);
    let mut p = T::one();
    for d in 0..lower.len() {
        let w = upper[d] - lower[d];
        if !(w > T::zero()) {
            return Err(Error::invalid(format!(
                "degenerate element: zero width in dimension {d}"
            )));
        }
        p = p * w * half;
    }
    Ok(p)
}

/// `prod (b_d - a_d) / 2`; rejects zero-width boxes.
pub fn element_probability<T: Scalar>(e: &Element<T>) -> Result<T> {
    box_probability(&e.lower, &e.upper)
}

/// Bisects `e` along every dimension in `dims`, producing `2^|dims|` children.
///
/// Children are ordered by a bit pattern over `dims` (bit set = upper half),
/// with the first listed dimension as the least significant bit.
pub fn split_element<T: Scalar>(e: &Element<T>, dims: &[usize]) -> Result<Vec<Element<T>>> {
    if dims.is_empty() {
        return Err(Error::invalid("split needs at least one dimension"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d >= e.dim()) {
        return Err(Error::invalid(format!(
            "split dimension {d} out of range for a {}-d element",
            e.dim()
        )));
    }
    let half = T::of(0.5);
    let mut children = Vec::with_capacity(1 << dims.len());
    for mask in 0..(1usize << dims.len()) {
        let mut lower = e.lower.clone();
        let mut upper = e.upper.clone();
        for (bit, &d) in dims.iter().enumerate() {
            let mid = (e.lower[d] + e.upper[d]) * half;
            if mask >> bit & 1 == 0 {
                upper[d] = mid;
            } else {
                lower[d] = mid;
            }
        }
        children.push(Element::new(lower, upper)?);
    }
    Ok(children)
}

/// A set of disjoint elements covering `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decomposition<T> {
    elements: Vec<Element<T>>,
}

/// Outcome of [`Decomposition::check_partition`].
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionDefect {
    BadElement { id: usize, reason: String },
    Overlap { first: usize, second: usize },
    MassMismatch { total: f64 },
}

impl std::fmt::Display for PartitionDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionDefect::BadElement { id, reason } => write!(f, "element {id}: {reason}"),
            PartitionDefect::Overlap { first, second } => write!(f, "elements {first} and {second} overlap"),
            PartitionDefect::MassMismatch { total } => write!(f, "element probabilities sum to {total}, not 1"),
        }
    }
}

impl<T: Scalar> Decomposition<T> {
    pub fn unit(dim: usize) -> Self {
        Self {
            elements: vec![Element::unit(dim)],
        }
    }

    /// Builds a decomposition and checks it is a partition of the domain.
    pub fn new(elements: Vec<Element<T>>) -> Result<Self> {
        let dec = Self { elements };
        let defects = dec.check_partition();
        if let Some(first) = defects.first() {
            return Err(Error::invalid(format!("not a partition of the domain: {first}")));
        }
        Ok(dec)
    }

    pub fn from_parts_unchecked(elements: Vec<Element<T>>) -> Self {
        Self { elements }
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements.first().map_or(0, Element::dim)
    }

    pub fn total_prob(&self) -> T {
        self.elements.iter().map(|e| e.prob).sum()
    }

    /// Replaces element `k` by `children`, keeping them at position `k..`.
    #[cfg(test)]
    pub(crate) fn replace(&mut self, k: usize, children: Vec<Element<T>>) {
        self.elements.splice(k..=k, children);
    }

    /// Index of the unique element containing `z`.
    pub fn locate(&self, z: &[T]) -> Result<usize> {
        if z.len() != self.dim() || z.iter().any(|v| !(v.abs() <= T::one())) {
            return Err(Error::domain(format!("point {z:?} is outside the random domain")));
        }
        self.elements
            .iter()
            .position(|e| e.contains(z))
            .ok_or_else(|| Error::domain(format!("point {z:?} is not covered by any element")))
    }

    /// Lists everything that keeps this from being a partition of `[-1, 1]^d`:
    /// malformed boxes (bad bounds or a stored probability that disagrees with the
    /// widths), pairwise overlaps, and total mass different from one.
    pub fn check_partition(&self) -> Vec<PartitionDefect> {
        let mut defects = Vec::new();
        let dim = self.dim();
        if self.elements.is_empty() {
            defects.push(PartitionDefect::MassMismatch { total: 0.0 });
            return defects;
        }
        for (id, e) in self.elements.iter().enumerate() {
            if e.dim() != dim || e.upper.len() != dim {
                defects.push(PartitionDefect::BadElement {
                    id,
                    reason: "dimension mismatch".into(),
                });
                continue;
            }
            if (0..dim).any(|d| !(e.lower[d] >= -T::one() && e.upper[d] <= T::one())) {
                defects.push(PartitionDefect::BadElement {
                    id,
                    reason: "bounds leave the domain".into(),
                });
                continue;
            }
            match box_probability(&e.lower, &e.upper) {
                Err(err) => defects.push(PartitionDefect::BadElement {
                    id,
                    reason: err.to_string(),
                }),
                Ok(p) if (p - e.prob).abs() > T::of(1e-12) => defects.push(PartitionDefect::BadElement {
                    id,
                    reason: format!("stored probability {} disagrees with box mass {}", e.prob, p),
                }),
                Ok(_) => {}
            }
        }
        for i in 0..self.elements.len() {
            for j in i + 1..self.elements.len() {
                if self.elements[i].dim() == dim
                    && self.elements[j].dim() == dim
                    && self.elements[i].overlaps(&self.elements[j])
                {
                    defects.push(PartitionDefect::Overlap { first: i, second: j });
                }
            }
        }
        let total: f64 = self.elements.iter().map(|e| e.prob.to_f64_lossy()).sum();
        if (total - 1.0).abs() > 1e-12 {
            defects.push(PartitionDefect::MassMismatch { total });
        }
        defects
    }
}

/// Points per generator chunk; chunk `c` draws from a ChaCha8 stream keyed by `seed ^ c`.
pub const SAMPLE_CHUNK: usize = 4096;

/// i.i.d. uniform points on the open cube `(-1, 1)^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    points: Vec<T>,
    seed: Option<u64>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn from_points(dim: usize, points: Vec<T>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "sample buffer must hold a positive whole number of points",
            ));
        }
        if points.iter().any(|v| !(v.abs() <= T::one())) {
            return Err(Error::domain("sample point outside [-1, 1]^d"));
        }
        Ok(Self {
            dim,
            points,
            seed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, T> {
        self.points.chunks(self.dim)
    }

    pub fn par_iter(&self) -> rayon::slice::Chunks<'_, T> {
        self.points.par_chunks(self.dim)
    }
}

/// Maps the top `p + 1` random bits onto the grid `(j + 1/2) 2^-p`,
/// `j in [-2^p, 2^p)`, with `2^-p` the machine epsilon of the target type:
/// symmetric, exactly representable, never `0` and never `±1`.
#[inline]
fn open_uniform(bits: u64, p: u32) -> f64 {
    let j = (bits >> (63 - p)) as i64 - (1i64 << p);
    (j as f64 + 0.5) * f64::powi(2.0, -(p as i32))
}

/// Draws `m` uniform points on `(-1, 1)^d`.
///
/// The generator is ChaCha8 keyed by `seed`. Points are produced in chunks of
/// [`SAMPLE_CHUNK`]; chunk `c` reads ChaCha stream `c`, so the output does not
/// depend on the number of worker threads and a shorter set is a prefix of a
/// longer one.
pub fn sample_uniform<T: Scalar>(m: usize, dim: usize, seed: u64) -> Result<SampleSet<T>> {
    if m == 0 || dim == 0 {
        return Err(Error::invalid("sample count and dimension must be positive"));
    }
    let p = (-T::epsilon().to_f64_lossy().log2()).round() as u32;
    let mut points = vec![T::zero(); m * dim];
    points
        .par_chunks_mut(SAMPLE_CHUNK * dim)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            for v in chunk.iter_mut() {
                *v = T::of(open_uniform(rng.next_u64(), p));
            }
        });
    Ok(SampleSet {
        dim,
        points,
        seed: Some(seed),
    })
}
