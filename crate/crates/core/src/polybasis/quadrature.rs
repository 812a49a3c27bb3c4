use serde::{Deserialize, Serialize};

use super::legendre::legendre_with_derivative;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Quadrature on [-1, 1] whose weights are normalized against the uniform density,
/// so they sum to one and `integrate` returns an expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `q`-point Gauss-Legendre rule with weights summing to one.
///
/// Nodes are roots of `P_q`, found by Newton iteration on the recurrence from
/// the usual cosine initial guess; the rule is symmetrized so that node `i` and
/// node `q - 1 - i` are exact negatives.
pub fn gauss_legendre<T: Scalar>(q: usize) -> Result<QuadratureRule<T>> {
    if q == 0 {
        return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![T::zero(); q];
    let mut weights = vec![T::zero(); q];
    let tol = T::newton_tol();
    let half = q.div_ceil(2);
    for i in 0..half {
        let theta = T::PI() * (T::of_usize(i) + T::of(0.75)) / (T::of_usize(q) + T::of(0.5));
        let mut x = theta.cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol {
                dp = legendre_with_derivative(q, x).1;
                break;
            }
        }
        if q % 2 == 1 && i == half - 1 {
            let d0 = legendre_with_derivative(q, T::zero()).1;
            nodes[i] = T::zero();
            weights[i] = T::one() / (d0 * d0);
        } else {
            let w = T::one() / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[q - 1 - i] = x;
            weights[i] = w;
            weights[q - 1 - i] = w;
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Tensor product of a 1-D rule over `dim` dimensions, enumerated with the
/// last coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct TensorGrid<T> {
    dim: usize,
    rule: QuadratureRule<T>,
}

impl<T: Scalar> TensorGrid<T> {
    pub fn new(rule: QuadratureRule<T>, dim: usize) -> Self {
        Self { dim, rule }
    }

    pub fn gauss(q: usize, dim: usize) -> Result<Self> {
        Ok(Self::new(gauss_legendre(q)?, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.rule.len().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `flat` of the grid written into `out`; returns its weight.
    pub fn point(&self, flat: usize, out: &mut [T]) -> T {
        let q = self.rule.len();
        let mut rem = flat;
        let mut w = T::one();
        for slot in out.iter_mut().rev() {
            let k = rem % q;
            rem /= q;
            *slot = self.rule.nodes[k];
            w = w * self.rule.weights[k];
        }
        w
    }

    pub fn points(&self) -> impl Iterator<Item = (Vec<T>, T)> + '_ {
        (0..self.len()).map(move |flat| {
            let mut x = vec![T::zero(); self.dim];
            let w = self.point(flat, &mut x);
            (x, w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_rules() {
        let r1 = gauss_legendre::<f64>(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_abs_diff_eq!(r1.weights()[0], 1.0, epsilon = 1e-15);

        let r2 = gauss_legendre::<f64>(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(r2.nodes()[0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes()[1], s, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(matches!(gauss_legendre::<f64>(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fourth_moment_with_three_nodes() {
        let r = gauss_legendre::<f64>(3).unwrap();
        assert_abs_diff_eq!(r.integrate(|x| x.powi(4)), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn monomial_exactness() {
        // E[x^k] under U(-1,1) is 1/(k+1) for even k, 0 for odd k.
        for q in 1..=40 {
            let r = gauss_legendre::<f64>(q).unwrap();
            assert!(r.nodes().iter().all(|x| x.abs() < 1.0));
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            for k in 0..2 * q {
                let exact = if k % 2 == 0 { 1.0 / (k as f64 + 1.0) } else { 0.0 };
                let got = r.integrate(|x| x.powi(k as i32));
                let err = if exact == 0.0 {
                    got.abs()
                } else {
                    ((got - exact) / exact).abs()
                };
                assert!(err < 1e-13, "q={q} k={k} err={err:e}");
            }
        }
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let r = gauss_legendre::<f64>(11).unwrap();
        for w in r.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..11 {
            assert_eq!(r.nodes()[i], -r.nodes()[10 - i]);
        }
    }

    #[test]
    fn tensor_grid_weights_sum_to_one() {
        let g = TensorGrid::<f64>::gauss(4, 3).unwrap();
        assert_eq!(g.len(), 64);
        let total: f64 = g.points().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        // E[x0^2 x2^2] = 1/9
        let m: f64 = g.points().map(|(x, w)| w * x[0] * x[0] * x[2] * x[2]).sum();
        assert_abs_diff_eq!(m, 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn single_precision_rule() {
        let r = gauss_legendre::<f32>(6).unwrap();
        assert!((r.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-6);
    }
}
