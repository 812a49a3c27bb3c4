//! Element-local gPC expansions built by pseudo-spectral collocation, the
//! multi-element surrogate assembled from them, and the surrogate-error
//! diagnostics that set the hybrid threshold.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polybasis::{orthonormal_legendre_all, IndexSet, MultiIndex, TensorGrid};
use crate::randomspace::{sample_uniform, Decomposition, Element};
use crate::scalar::Scalar;

/// The exact limit-state function `g`; failure is `g(z) < 0`.
///
/// Implementations must be deterministic and count every call to `evaluate`.
pub trait LimitStateModel<T>: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, z: &[T]) -> Result<T>;
    fn call_count(&self) -> u64;
}

/// Wraps a closure as a [`LimitStateModel`] with an atomic call counter.
pub struct CountedModel<T, F> {
    dim: usize,
    f: F,
    calls: AtomicU64,
    _scalar: PhantomData<fn(&[T]) -> T>,
}

impl<T, F> CountedModel<T, F>
where
    F: Fn(&[T]) -> Result<T> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            calls: AtomicU64::new(0),
            _scalar: PhantomData,
        }
    }
}

impl<T, F> LimitStateModel<T> for CountedModel<T, F>
where
    F: Fn(&[T]) -> Result<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, z: &[T]) -> Result<T> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        (self.f)(z)
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Anything that can stand in for `g` on every sample.
pub trait Surrogate<T>: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: &[T]) -> Result<T>;
}

/// Closure surrogate, mostly for closed-form approximations and tests.
pub struct FnSurrogate<T, F> {
    dim: usize,
    f: F,
    _scalar: PhantomData<fn(&[T]) -> T>,
}

impl<T, F: Fn(&[T]) -> T + Sync> FnSurrogate<T, F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            _scalar: PhantomData,
        }
    }
}

impl<T, F: Fn(&[T]) -> T + Sync> Surrogate<T> for FnSurrogate<T, F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: &[T]) -> Result<T> {
        Ok((self.f)(z))
    }
}

/// `sum_i c_i Phi_i(x)` on one element, `x` the element's reference coordinate.
#[derive(Debug, Clone)]
pub struct GpcExpansion<T> {
    element: Element<T>,
    basis: Arc<IndexSet>,
    coeffs: Vec<T>,
}

impl<T: Scalar> GpcExpansion<T> {
    /// `coeffs` follow the graded ordering of [`IndexSet`].
    pub fn new(element: Element<T>, order: usize, coeffs: Vec<T>) -> Result<Self> {
        let basis = Arc::new(IndexSet::new(element.dim(), order)?);
        Self::with_basis(element, basis, coeffs)
    }

    pub fn with_basis(element: Element<T>, basis: Arc<IndexSet>, coeffs: Vec<T>) -> Result<Self> {
        if basis.dim() != element.dim() {
            return Err(Error::invalid("basis and element dimensions differ"));
        }
        if coeffs.len() != basis.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients for order {} in {} dimensions, got {}",
                basis.len(),
                basis.order(),
                basis.dim(),
                coeffs.len()
            )));
        }
        Ok(Self { element, basis, coeffs })
    }

    pub fn constant(element: Element<T>, value: T) -> Self {
        let basis = Arc::new(IndexSet::new(element.dim(), 0).expect("element has positive dimension"));
        Self {
            element,
            basis,
            coeffs: vec![value],
        }
    }

    pub fn element(&self) -> &Element<T> {
        &self.element
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn dim(&self) -> usize {
        self.element.dim()
    }

    pub fn basis(&self) -> &Arc<IndexSet> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, index: &MultiIndex) -> T {
        self.basis.position(index).map_or(T::zero(), |k| self.coeffs[k])
    }

    /// Evaluates at a reference point in `[-1, 1]^d` (no bounds check).
    pub fn eval_local(&self, x: &[T]) -> T {
        if x.len() == 1 {
            // Fused recurrence; avoids a scratch buffer on the 1-D hot path.
            let x = x[0];
            let mut prev = T::one();
            let mut cur = x;
            let mut acc = self.coeffs[0];
            for (n, &c) in self.coeffs.iter().enumerate().skip(1) {
                if n > 1 {
                    let k = T::of_usize(n - 1);
                    let next = ((k + k + T::one()) * x * cur - k * prev) / (k + T::one());
                    prev = cur;
                    cur = next;
                }
                acc = acc + c * T::of_usize(2 * n + 1).sqrt() * cur;
            }
            return acc;
        }
        let mut phi = vec![T::zero(); self.basis.len()];
        self.basis.eval_basis(x, &mut phi);
        phi.iter().zip(&self.coeffs).map(|(&p, &c)| p * c).sum()
    }

    pub(crate) fn eval_global_unchecked(&self, z: &[T]) -> T {
        let mut x = vec![T::zero(); z.len()];
        self.element.to_local_into(z, &mut x);
        self.eval_local(&x)
    }
}

/// `sum_i c_i Phi_i(to_local(z))`; `z` must lie in the expansion's element.
pub fn eval_expansion<T: Scalar>(exp: &GpcExpansion<T>, z: &[T]) -> Result<T> {
    let x = exp.element.to_local(z)?;
    Ok(exp.eval_local(&x))
}

/// Variance of the expansion over its element: squared coefficients past the mean.
pub fn local_variance<T: Scalar>(exp: &GpcExpansion<T>) -> T {
    exp.coeffs.iter().skip(1).map(|&c| c * c).sum()
}

impl<T: Scalar> Surrogate<T> for GpcExpansion<T> {
    fn dim(&self) -> usize {
        self.element.dim()
    }

    fn eval(&self, z: &[T]) -> Result<T> {
        eval_expansion(self, z)
    }
}

/// Projects `f` (a function of the global coordinate) onto `basis` over `element`
/// using the tensor grid; returns the coefficients in basis order.
pub(crate) fn project_onto<T, F>(
    element: &Element<T>,
    basis: &IndexSet,
    grid: &TensorGrid<T>,
    mut f: F,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    let d = element.dim();
    let mut coeffs = vec![T::zero(); basis.len()];
    let mut x = vec![T::zero(); d];
    let mut z = vec![T::zero(); d];
    let mut phi = vec![T::zero(); basis.len()];
    for flat in 0..grid.len() {
        let w = grid.point(flat, &mut x);
        element.to_global_into(&x, &mut z);
        let g = f(&z)?;
        basis.eval_basis(&x, &mut phi);
        for (c, &p) in coeffs.iter_mut().zip(&phi) {
            *c = *c + w * g * p;
        }
    }
    Ok(coeffs)
}

/// Pseudo-spectral projection of `model` onto the order-`order` basis of `element`
/// with `q` Gauss nodes per dimension; costs exactly `q^d` model calls.
pub fn build_collocation<T: Scalar, M: LimitStateModel<T> + ?Sized>(
    model: &M,
    element: &Element<T>,
    order: usize,
    q: usize,
) -> Result<GpcExpansion<T>> {
    if q < order + 1 {
        return Err(Error::invalid(format!(
            "{q} nodes per dimension cannot resolve order {order}"
        )));
    }
    if model.dim() != element.dim() {
        return Err(Error::invalid("model and element dimensions differ"));
    }
    let basis = Arc::new(IndexSet::new(element.dim(), order)?);
    let grid = TensorGrid::gauss(q, element.dim())?;
    let coeffs = project_onto(element, &basis, &grid, |z| {
        model.evaluate(z).map_err(|e| Error::ModelEvaluation {
            point: z.iter().map(|v| v.to_f64_lossy()).collect(),
            source: Box::new(e),
        })
    })?;
    GpcExpansion::with_basis(element.clone(), basis, coeffs)
}

/// Piecewise surrogate: one expansion per element of a decomposition.
#[derive(Debug, Clone)]
pub struct MultiElementSurrogate<T> {
    decomposition: Decomposition<T>,
    expansions: Vec<GpcExpansion<T>>,
}

impl<T: Scalar> MultiElementSurrogate<T> {
    pub fn new(decomposition: Decomposition<T>, expansions: Vec<GpcExpansion<T>>) -> Result<Self> {
        if decomposition.len() != expansions.len() {
            return Err(Error::invalid(format!(
                "{} elements but {} expansions",
                decomposition.len(),
                expansions.len()
            )));
        }
        for (k, (e, x)) in decomposition.elements().iter().zip(&expansions).enumerate() {
            if e != x.element() {
                return Err(Error::invalid(format!("expansion {k} does not live on element {k}")));
            }
        }
        Ok(Self {
            decomposition,
            expansions,
        })
    }

    /// Wraps one expansion on the whole domain.
    pub fn single(expansion: GpcExpansion<T>) -> Result<Self> {
        let dec = Decomposition::new(vec![expansion.element().clone()])?;
        Self::new(dec, vec![expansion])
    }

    pub fn decomposition(&self) -> &Decomposition<T> {
        &self.decomposition
    }

    pub fn expansions(&self) -> &[GpcExpansion<T>] {
        &self.expansions
    }

    pub fn len(&self) -> usize {
        self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansions.is_empty()
    }

    /// Element index and surrogate value at `z`.
    pub fn locate_eval(&self, z: &[T]) -> Result<(usize, T)> {
        let k = self.decomposition.locate(z)?;
        Ok((k, self.expansions[k].eval_global_unchecked(z)))
    }

    pub fn to_cache(&self) -> SurrogateCache<T> {
        SurrogateCache {
            dim: self.decomposition.dim(),
            elements: self
                .expansions
                .iter()
                .map(|x| CachedElement {
                    lower: x.element().lower().to_vec(),
                    upper: x.element().upper().to_vec(),
                    prob: x.element().prob(),
                    order: x.order(),
                    coeffs: x.coeffs().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_cache(cache: &SurrogateCache<T>) -> Result<Self> {
        let mut elements = Vec::with_capacity(cache.elements.len());
        let mut expansions = Vec::with_capacity(cache.elements.len());
        for c in &cache.elements {
            let e = Element::new(c.lower.clone(), c.upper.clone())?;
            expansions.push(GpcExpansion::new(e.clone(), c.order, c.coeffs.clone())?);
            elements.push(e);
        }
        Self::new(Decomposition::new(elements)?, expansions)
    }
}

/// Locates `z` and evaluates that element's expansion.
pub fn eval_me_surrogate<T: Scalar>(s: &MultiElementSurrogate<T>, z: &[T]) -> Result<T> {
    s.locate_eval(z).map(|(_, v)| v)
}

impl<T: Scalar> Surrogate<T> for MultiElementSurrogate<T> {
    fn dim(&self) -> usize {
        self.decomposition.dim()
    }

    fn eval(&self, z: &[T]) -> Result<T> {
        eval_me_surrogate(self, z)
    }
}

/// On-disk form of a multi-element surrogate: element bounds plus the ordered
/// coefficient array of each expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCache<T> {
    pub dim: usize,
    pub elements: Vec<CachedElement<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedElement<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub prob: T,
    pub order: usize,
    pub coeffs: Vec<T>,
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> SurrogateCache<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The decomposition as stored, without validating it.
    pub fn raw_decomposition(&self) -> Decomposition<T> {
        Decomposition::from_parts_unchecked(
            self.elements
                .iter()
                .map(|c| Element::from_parts_unchecked(c.lower.clone(), c.upper.clone(), c.prob))
                .collect(),
        )
    }
}

/// Monte Carlo estimate of `||g - g~||_{L^p}` on `m` fresh samples drawn with `seed`.
/// Costs `m` exact calls; diagnostic only.
pub fn lp_error<T, S, M>(surrogate: &S, model: &M, p: T, m: usize, seed: u64) -> Result<T>
where
    T: Scalar,
    S: Surrogate<T> + ?Sized,
    M: LimitStateModel<T> + ?Sized,
{
    if !(p >= T::one()) {
        return Err(Error::invalid("norm order p must be at least 1"));
    }
    let samples = sample_uniform::<T>(m, model.dim(), seed)?;
    let terms: Vec<T> = samples
        .par_iter()
        .map(|z| Ok((model.evaluate(z)? - surrogate.eval(z)?).abs().powf(p)))
        .collect::<Result<_>>()?;
    let mean = terms.iter().copied().sum::<T>() / T::of_usize(m);
    Ok(mean.powf(T::one() / p))
}

/// Smallest admissible hybrid threshold `gamma = eps_p / eps^(1/p)`.
pub fn gamma_bound<T: Scalar>(eps_p: T, eps: T, p: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::invalid("accuracy target must be positive"));
    }
    if !(eps_p >= T::zero()) || !(p >= T::one()) {
        return Err(Error::invalid("need eps_p >= 0 and p >= 1"));
    }
    Ok(eps_p / eps.powf(T::one() / p))
}

/// Evaluates `orthonormal_legendre(k, x)` for `k <= order`; shared helper for
/// closed-form surrogates.
pub fn legendre_row<T: Scalar>(order: usize, x: T) -> Vec<T> {
    let mut v = vec![T::zero(); order + 1];
    orthonormal_legendre_all(x, &mut v);
    v
}
