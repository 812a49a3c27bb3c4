use std::sync::Arc;

use crate::error::{Error, Result};
use crate::polybasis::{triple_products, IndexSet, TripleProductTensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
struct Term<T> {
    coeff: T,
    vars: [usize; 2],
    degree: usize,
}

/// ODE right-hand side that is a polynomial of degree at most two in the state.
///
/// Parameter variables have zero derivative; they carry random coefficients
/// (for example a random decay rate) through the Galerkin system.
#[derive(Debug, Clone)]
pub struct PolynomialSystem<T> {
    equations: Vec<Vec<Term<T>>>,
    parameters: Vec<bool>,
}

impl<T: Scalar> PolynomialSystem<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            equations: vec![Vec::new(); n_vars],
            parameters: vec![false; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.equations.len()
    }

    /// Adds `coeff * prod(u[v] for v in vars)` to equation `eq`.
    pub fn add_term(&mut self, eq: usize, coeff: T, vars: &[usize]) -> Result<&mut Self> {
        let n = self.n_vars();
        if eq >= n || vars.iter().any(|&v| v >= n) {
            return Err(Error::invalid("variable index out of range"));
        }
        if vars.len() > 2 {
            return Err(Error::UnsupportedModel(format!(
                "monomial of degree {} in equation {eq}; only quadratic systems are supported",
                vars.len()
            )));
        }
        if self.parameters[eq] {
            return Err(Error::invalid(format!("variable {eq} is a parameter")));
        }
        let mut v = [0; 2];
        v[..vars.len()].copy_from_slice(vars);
        self.equations[eq].push(Term {
            coeff,
            vars: v,
            degree: vars.len(),
        });
        Ok(self)
    }

    /// Declares `var` a time-independent parameter.
    pub fn mark_parameter(&mut self, var: usize) -> Result<&mut Self> {
        if var >= self.n_vars() || !self.equations[var].is_empty() {
            return Err(Error::invalid(format!("variable {var} cannot be a parameter")));
        }
        self.parameters[var] = true;
        Ok(self)
    }

    pub fn is_parameter(&self, var: usize) -> bool {
        self.parameters[var]
    }

    /// Pointwise right-hand side.
    pub fn eval(&self, u: &[T], du: &mut [T]) {
        for (eq, out) in self.equations.iter().zip(du.iter_mut()) {
            *out = eq
                .iter()
                .map(|t| match t.degree {
                    0 => t.coeff,
                    1 => t.coeff * u[t.vars[0]],
                    _ => t.coeff * u[t.vars[0]] * u[t.vars[1]],
                })
                .sum();
        }
    }
}

/// Galerkin right-hand side: `state` and `out` hold `n_vars` blocks of
/// `tp.len()` coefficients each. Quadratic terms are contracted through the
/// triple-product tensor; linear terms act coefficient-wise.
pub fn galerkin_rhs<T: Scalar>(system: &PolynomialSystem<T>, state: &[T], tp: &TripleProductTensor<T>, out: &mut [T]) {
    let p = tp.len();
    debug_assert_eq!(state.len(), system.n_vars() * p);
    out.iter_mut().for_each(|v| *v = T::zero());
    for (eq, terms) in system.equations.iter().enumerate() {
        let du = &mut out[eq * p..(eq + 1) * p];
        for t in terms {
            match t.degree {
                0 => du[0] = du[0] + t.coeff,
                1 => {
                    let a = &state[t.vars[0] * p..(t.vars[0] + 1) * p];
                    for (d, &x) in du.iter_mut().zip(a) {
                        *d = *d + t.coeff * x;
                    }
                }
                _ => {
                    let a = &state[t.vars[0] * p..(t.vars[0] + 1) * p];
                    let b = &state[t.vars[1] * p..(t.vars[1] + 1) * p];
                    for (i, d) in du.iter_mut().enumerate() {
                        let s: T = tp.row(i).iter().map(|&(j, k, e)| e * a[j] * b[k]).sum();
                        *d = *d + t.coeff * s;
                    }
                }
            }
        }
    }
}

/// A polynomial system together with the full- and reduced-order tensors
/// needed to propagate and monitor it.
#[derive(Debug, Clone)]
pub struct GalerkinSystem<T> {
    pub(crate) system: PolynomialSystem<T>,
    pub(crate) basis: Arc<IndexSet>,
    pub(crate) full: TripleProductTensor<T>,
    pub(crate) reduced: TripleProductTensor<T>,
}

impl<T: Scalar> GalerkinSystem<T> {
    pub fn new(system: PolynomialSystem<T>, dim: usize, order: usize, reduced_order: usize) -> Result<Self> {
        if reduced_order >= order {
            return Err(Error::invalid("reduced order must be below the full order"));
        }
        Ok(Self {
            system,
            basis: Arc::new(IndexSet::new(dim, order)?),
            full: triple_products(dim, order)?,
            reduced: triple_products(dim, reduced_order)?,
        })
    }

    pub fn system(&self) -> &PolynomialSystem<T> {
        &self.system
    }

    pub fn basis(&self) -> &Arc<IndexSet> {
        &self.basis
    }

    pub fn n_vars(&self) -> usize {
        self.system.n_vars()
    }

    pub fn full_len(&self) -> usize {
        self.full.len()
    }

    pub fn reduced_len(&self) -> usize {
        self.reduced.len()
    }

    pub fn rhs(&self, state: &[T], out: &mut [T]) {
        galerkin_rhs(&self.system, state, &self.full, out)
    }

    /// Truncates a full state to the reduced order.
    pub fn truncate(&self, state: &[T]) -> Vec<T> {
        let (p, p0) = (self.full_len(), self.reduced_len());
        (0..self.n_vars())
            .flat_map(|v| state[v * p..v * p + p0].iter().copied())
            .collect()
    }

    pub fn reduced_rhs(&self, reduced_state: &[T], out: &mut [T]) {
        galerkin_rhs(&self.system, reduced_state, &self.reduced, out)
    }
}

/// Classical fourth-order Runge-Kutta step with reusable scratch space.
#[derive(Debug, Clone)]
pub struct Rk4<T> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![T::zero(); n]),
            tmp: vec![T::zero(); n],
        }
    }

    pub fn step<F: FnMut(&[T], &mut [T])>(&mut self, f: &mut F, y: &mut [T], dt: T) {
        let half = dt / T::of(2.0);
        let [k1, k2, k3, k4] = &mut self.k;
        f(y, k1);
        for ((t, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *t = y + half * k;
        }
        f(&self.tmp, k2);
        for ((t, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *t = y + half * k;
        }
        f(&self.tmp, k3);
        for ((t, &y), &k) in self.tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *t = y + dt * k;
        }
        f(&self.tmp, k4);
        let sixth = dt / T::of(6.0);
        for i in 0..y.len() {
            y[i] = y[i] + sixth * (k1[i] + T::of(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

/// Single RK4 step allocating its own scratch; convenient outside hot loops.
pub fn rk4_step<T: Scalar, F: FnMut(&[T], &mut [T])>(mut f: F, y: &mut [T], dt: T) {
    Rk4::new(y.len()).step(&mut f, y, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_decay_is_coefficientwise() {
        let mut sys = PolynomialSystem::<f64>::new(1);
        sys.add_term(0, -1.0, &[0]).unwrap();
        let tp = triple_products(2, 2).unwrap();
        let c: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 0.4).collect();
        let mut out = vec![0.0; 6];
        galerkin_rhs(&sys, &c, &tp, &mut out);
        for (o, v) in out.iter().zip(&c) {
            assert_eq!(*o, -v);
        }
    }

    #[test]
    fn quadratic_contraction() {
        let mut sys = PolynomialSystem::<f64>::new(1);
        sys.add_term(0, 1.0, &[0, 0]).unwrap();
        let tp = triple_products(1, 1).unwrap();
        let mut out = vec![0.0; 2];
        galerkin_rhs(&sys, &[1.0, 0.0], &tp, &mut out);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cubic_terms_are_rejected() {
        let mut sys = PolynomialSystem::<f64>::new(2);
        assert!(matches!(
            sys.add_term(0, 1.0, &[0, 1, 1]),
            Err(Error::UnsupportedModel(_))
        ));
        assert!(sys.add_term(0, 1.0, &[2]).is_err());
        sys.mark_parameter(1).unwrap();
        assert!(sys.add_term(1, 1.0, &[0]).is_err());
        sys.add_term(0, 1.0, &[0]).unwrap();
        assert!(sys.mark_parameter(0).is_err());
    }

    #[test]
    fn pointwise_eval() {
        let mut sys = PolynomialSystem::<f64>::new(2);
        sys.add_term(0, 2.0, &[]).unwrap().add_term(0, -1.0, &[0, 1]).unwrap();
        sys.add_term(1, 3.0, &[1]).unwrap();
        let mut du = [0.0; 2];
        sys.eval(&[2.0, 5.0], &mut du);
        assert_eq!(du, [2.0 - 10.0, 15.0]);
    }

    fn rk4_error(dt: f64) -> f64 {
        let mut y = [1.0];
        let mut rk = Rk4::new(1);
        let n = (1.0 / dt).round() as usize;
        let mut f = |u: &[f64], du: &mut [f64]| du[0] = -u[0];
        for _ in 0..n {
            rk.step(&mut f, &mut y, dt);
        }
        (y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn rk4_is_fourth_order() {
        for dt in [0.1, 0.05, 0.02] {
            let ratio = rk4_error(dt) / rk4_error(dt / 2.0);
            assert!((12.0..=20.0).contains(&ratio), "dt {dt}: ratio {ratio}");
        }
    }

    #[test]
    fn single_step_helper_matches() {
        let mut a = [1.0, 2.0];
        let mut b = a;
        let f = |u: &[f64], du: &mut [f64]| {
            du[0] = u[1];
            du[1] = -u[0];
        };
        rk4_step(f, &mut a, 0.1);
        Rk4::new(2).step(&mut { f }, &mut b, 0.1);
        assert_eq!(a, b);
    }
}
