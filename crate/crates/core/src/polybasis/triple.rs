use super::multi_index::IndexSet;
use super::quadrature::gauss_legendre;
use crate::error::Result;
use crate::scalar::Scalar;

/// Nonzero triple products `E[Phi_i Phi_j Phi_k]` over a total-degree index set.
///
/// Stored row-wise: for every `i`, the list of `(j, k, value)` with a nonzero
/// entry, sorted by `(j, k)`. Both orderings of `(j, k)` are present.
#[derive(Debug, Clone)]
pub struct TripleProductTensor<T> {
    dim: usize,
    order: usize,
    rows: Vec<Vec<(usize, usize, T)>>,
}

impl<T: Scalar> TripleProductTensor<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, usize, T)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.rows[i]
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(j, k)))
            .map(|pos| self.rows[i][pos].2)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Builds the triple-product tensor for `dim` dimensions up to total degree `order`.
///
/// One-dimensional factors come from a Gauss rule with `ceil((3N+1)/2)` nodes,
/// which is exact for the degree-`3N` integrands; the sparsity pattern uses the
/// Legendre selection rule (even sum, triangle inequality).
pub fn triple_products<T: Scalar>(dim: usize, order: usize) -> Result<TripleProductTensor<T>> {
    let set = IndexSet::new(dim, order)?;
    let n = order + 1;
    let q = (3 * order + 1).div_ceil(2).max(1);
    let rule = gauss_legendre::<T>(q)?;

    let mut vals = vec![T::zero(); n * q];
    for (k, &x) in rule.nodes().iter().enumerate() {
        let mut buf = vec![T::zero(); n];
        super::legendre::orthonormal_legendre_all(x, &mut buf);
        for deg in 0..n {
            vals[deg * q + k] = buf[deg];
        }
    }
    let mut one_d = vec![T::zero(); n * n * n];
    for a in 0..n {
        for b in a..n {
            for c in b..n {
                if (a + b + c) % 2 == 1 || c > a + b {
                    continue;
                }
                let v: T = (0..q)
                    .map(|k| rule.weights()[k] * vals[a * q + k] * vals[b * q + k] * vals[c * q + k])
                    .sum();
                for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    one_d[(x * n + y) * n + z] = v;
                }
            }
        }
    }

    let idx = set.indices();
    let mut rows = Vec::with_capacity(idx.len());
    for mi in idx {
        let mut row = Vec::new();
        for (j, mj) in idx.iter().enumerate() {
            for (k, mk) in idx.iter().enumerate() {
                let mut v = T::one();
                for d in 0..dim {
                    let f = one_d[(mi.entries()[d] * n + mj.entries()[d]) * n + mk.entries()[d]];
                    if f == T::zero() {
                        v = T::zero();
                        break;
                    }
                    v = v * f;
                }
                if v != T::zero() {
                    row.push((j, k, v));
                }
            }
        }
        rows.push(row);
    }
    Ok(TripleProductTensor { dim, order, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::quadrature::TensorGrid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_row_is_identity() {
        let t = triple_products::<f64>(2, 3).unwrap();
        for j in 0..t.len() {
            for k in 0..t.len() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(t.get(0, j, k), expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn one_dimensional_values() {
        let t = triple_products::<f64>(1, 3).unwrap();
        assert_abs_diff_eq!(t.get(1, 1, 2), 2.0 / 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(t.get(1, 1, 1), 0.0);
    }

    #[test]
    fn permutation_symmetry() {
        let t = triple_products::<f64>(3, 3).unwrap();
        let p = t.len();
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    let v = t.get(i, j, k);
                    for w in [
                        t.get(i, k, j),
                        t.get(j, i, k),
                        t.get(j, k, i),
                        t.get(k, i, j),
                        t.get(k, j, i),
                    ] {
                        assert!((v - w).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let set = IndexSet::new(2, 3).unwrap();
        let t = triple_products::<f64>(2, 3).unwrap();
        let grid = TensorGrid::<f64>::gauss(8, 2).unwrap();
        let p = set.len();
        let mut phi = vec![0.0; p];
        let mut brute = vec![0.0; p * p * p];
        for (x, w) in grid.points() {
            set.eval_basis(&x, &mut phi);
            for i in 0..p {
                for j in 0..p {
                    for k in 0..p {
                        brute[(i * p + j) * p + k] += w * phi[i] * phi[j] * phi[k];
                    }
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                for k in 0..p {
                    assert_abs_diff_eq!(t.get(i, j, k), brute[(i * p + j) * p + k], epsilon = 1e-12);
                }
            }
        }
    }
}
