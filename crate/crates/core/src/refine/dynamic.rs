use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::galerkin::{GalerkinSystem, Rk4};
use super::{select_dims, RefinementConfig, RefinementEvent};
use crate::error::{Error, Result};
use crate::polybasis::{IndexSet, MultiIndex, TensorGrid};
use crate::randomspace::{split_element, Decomposition, Element};
use crate::scalar::Scalar;
use crate::surrogate::{GpcExpansion, MultiElementSurrogate};

/// How children are initialized after a split during time integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChildInit {
    /// Project the parent's current expansion onto each child and continue.
    #[default]
    Project,
    /// Project the initial data onto each child and integrate again from t = 0.
    Resolve,
}

/// Coefficients of every state variable on one element at one time.
///
/// `coeffs` holds one block of `basis.len()` coefficients per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinState<T> {
    pub time: T,
    pub n_vars: usize,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> GalerkinState<T> {
    pub fn var(&self, v: usize) -> &[T] {
        let p = self.coeffs.len() / self.n_vars;
        &self.coeffs[v * p..(v + 1) * p]
    }
}

/// Energy transfer `Q` between the full and truncated Galerkin systems, and
/// its per-dimension shares `s_i` taken at the reduced-order axis modes.
///
/// `full_rhs` and `state` are full-order; `reduced_rhs` is the truncated
/// system evaluated at the truncation of `state`.
pub fn dynamic_indicator<T: Scalar>(
    sys: &GalerkinSystem<T>,
    full_rhs: &[T],
    reduced_rhs: &[T],
    state: &[T],
) -> (T, Vec<T>) {
    let (p, p0) = (sys.full_len(), sys.reduced_len());
    let two = T::of(2.0);
    let d = sys.basis.dim();
    let n0 = sys.reduced.order();
    let axis: Vec<usize> = (0..d)
        .map(|i| {
            sys.basis
                .position(&MultiIndex::axis(d, i, n0))
                .expect("axis index in basis")
        })
        .collect();
    let mut q = T::zero();
    let mut s = vec![T::zero(); d];
    for v in 0..sys.n_vars() {
        let u = &state[v * p..(v + 1) * p];
        let full = &full_rhs[v * p..(v + 1) * p];
        let red = &reduced_rhs[v * p0..(v + 1) * p0];
        for j in 0..p0 {
            q = q + two * (full[j] - red[j]) * u[j];
        }
        for (si, &j) in s.iter_mut().zip(&axis) {
            *si = *si + two * (full[j] - red[j]) * u[j];
        }
    }
    (q.abs(), s.into_iter().map(T::abs).collect())
}

impl<T: Scalar> GalerkinSystem<T> {
    /// `Q` and `s` for a full-order state.
    pub fn indicator(&self, state: &[T]) -> (T, Vec<T>) {
        let mut full = vec![T::zero(); state.len()];
        self.rhs(state, &mut full);
        let reduced_state = self.truncate(state);
        let mut red = vec![T::zero(); reduced_state.len()];
        self.reduced_rhs(&reduced_state, &mut red);
        dynamic_indicator(self, &full, &red, state)
    }
}

#[derive(Debug, Clone)]
pub struct DynamicRefinement<T> {
    pub decomposition: Decomposition<T>,
    pub states: Vec<GalerkinState<T>>,
    pub basis: Arc<IndexSet>,
    pub events: Vec<RefinementEvent>,
    pub truncated: bool,
}

impl<T: Scalar> DynamicRefinement<T> {
    /// Surrogate `u_var(T) - shift` over the final mesh.
    pub fn surrogate(&self, var: usize, shift: T) -> Result<MultiElementSurrogate<T>> {
        let expansions = self
            .decomposition
            .elements()
            .iter()
            .zip(&self.states)
            .map(|(el, st)| {
                let mut c = st.var(var).to_vec();
                c[0] = c[0] - shift;
                GpcExpansion::with_basis(el.clone(), self.basis.clone(), c)
            })
            .collect::<Result<_>>()?;
        MultiElementSurrogate::new(self.decomposition.clone(), expansions)
    }
}

/// Projects the variables selected by `mask` of a vector-valued `f` onto the
/// basis over `element`. Unselected blocks stay zero.
fn project_vars<T, F>(
    element: &Element<T>,
    basis: &IndexSet,
    grid: &TensorGrid<T>,
    n_vars: usize,
    mask: &[bool],
    mut f: F,
) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let d = element.dim();
    let p = basis.len();
    let mut coeffs = vec![T::zero(); n_vars * p];
    let (mut x, mut z) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut phi = vec![T::zero(); p];
    let mut vals = vec![T::zero(); n_vars];
    for flat in 0..grid.len() {
        let w = grid.point(flat, &mut x);
        element.to_global_into(&x, &mut z);
        f(&z, &mut vals);
        basis.eval_basis(&x, &mut phi);
        for v in (0..n_vars).filter(|&v| mask[v]) {
            let wv = w * vals[v];
            for (c, &ph) in coeffs[v * p..(v + 1) * p].iter_mut().zip(&phi) {
                *c = *c + wv * ph;
            }
        }
    }
    coeffs
}

struct Driver<'a, T, I> {
    sys: &'a GalerkinSystem<T>,
    initial: &'a I,
    proj_grid: TensorGrid<T>,
    exact_grid: TensorGrid<T>,
    all: Vec<bool>,
    states_mask: Vec<bool>,
    params_mask: Vec<bool>,
    h: T,
}

impl<T, I> Driver<'_, T, I>
where
    T: Scalar,
    I: Fn(&[T], &mut [T]) + Sync,
{
    fn initial_state(&self, el: &Element<T>) -> Vec<T> {
        project_vars(
            el,
            &self.sys.basis,
            &self.proj_grid,
            self.sys.n_vars(),
            &self.all,
            |z, out| (self.initial)(z, out),
        )
    }

    fn integrate(&self, state: &mut [T], steps: usize, t0: T) -> Result<()> {
        let mut rk = Rk4::new(state.len());
        let mut f = |u: &[T], du: &mut [T]| self.sys.rhs(u, du);
        for s in 0..steps {
            rk.step(&mut f, state, self.h);
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure {
                    time: (t0 + self.h * T::of_usize(s + 1)).to_f64_lossy(),
                    reason: "non-finite Galerkin coefficients".into(),
                });
            }
        }
        Ok(())
    }

    fn child_state(&self, parent_el: &Element<T>, parent: &[T], child: &Element<T>) -> Vec<T> {
        let basis = &self.sys.basis;
        let n = self.sys.n_vars();
        let p = basis.len();
        let exps: Vec<GpcExpansion<T>> = (0..n)
            .map(|v| {
                GpcExpansion::with_basis(parent_el.clone(), basis.clone(), parent[v * p..(v + 1) * p].to_vec())
                    .expect("consistent basis")
            })
            .collect();
        let mut out = project_vars(child, basis, &self.exact_grid, n, &self.states_mask, |z, vals| {
            for (val, e) in vals.iter_mut().zip(&exps) {
                *val = e.eval_global_unchecked(z);
            }
        });
        // Parameters are known functions of z; re-project them from the source.
        let params = project_vars(child, basis, &self.proj_grid, n, &self.params_mask, |z, o| {
            (self.initial)(z, o)
        });
        for v in (0..n).filter(|&v| self.params_mask[v]) {
            out[v * p..(v + 1) * p].copy_from_slice(&params[v * p..(v + 1) * p]);
        }
        out
    }
}

/// Integrates the Galerkin system element by element with RK4 and splits
/// elements whose energy transfer satisfies `Q * prob >= theta1`.
///
/// `initial(z, out)` writes every variable's value at `z` at time zero
/// (parameters included). The criterion is checked every
/// `cfg.check_interval`; the final mesh and states at `final_time` are returned.
pub fn adapt_dynamic<T, I>(
    sys: &GalerkinSystem<T>,
    initial: &I,
    cfg: &RefinementConfig,
    final_time: f64,
    dt: f64,
    projection_nodes: usize,
) -> Result<DynamicRefinement<T>>
where
    T: Scalar,
    I: Fn(&[T], &mut [T]) + Sync,
{
    cfg.validate_dynamic()?;
    if cfg.order != sys.basis.order() || cfg.reduced_order != sys.reduced.order() {
        return Err(Error::invalid("configuration orders differ from the Galerkin system"));
    }
    if !(final_time > 0.0 && dt > 0.0) {
        return Err(Error::invalid("final time and step must be positive"));
    }
    let total = (final_time / dt).ceil() as usize;
    let h = T::of(final_time / total as f64);
    let per_check = ((cfg.check_interval / dt).round() as usize).max(1);
    let n = sys.n_vars();
    let params_mask: Vec<bool> = (0..n).map(|v| sys.system.is_parameter(v)).collect();
    let driver = Driver {
        sys,
        initial,
        proj_grid: TensorGrid::gauss(projection_nodes.max(cfg.order + 1), sys.basis.dim())?,
        exact_grid: TensorGrid::gauss(cfg.order + 1, sys.basis.dim())?,
        all: vec![true; n],
        states_mask: params_mask.iter().map(|p| !p).collect(),
        params_mask,
        h,
    };

    let mut elements = vec![Element::unit(sys.basis.dim())];
    let mut states = vec![driver.initial_state(&elements[0])];
    let mut events = Vec::new();
    let mut truncated = false;
    let mut done = 0usize;

    while done < total {
        let steps = per_check.min(total - done);
        let t0 = h * T::of_usize(done);
        states
            .par_iter_mut()
            .map(|s| driver.integrate(s, steps, t0))
            .collect::<Result<()>>()?;
        done += steps;
        if done == total {
            break;
        }
        let t = h * T::of_usize(done);

        let indicators: Vec<(T, Vec<T>)> = states.par_iter().map(|s| sys.indicator(s)).collect();
        let mut count = elements.len();
        let mut next_el = Vec::with_capacity(count);
        let mut next_st = Vec::with_capacity(count);
        for (k, ((el, st), (q, s))) in elements.into_iter().zip(states).zip(indicators).enumerate() {
            let score = (q * el.prob()).to_f64_lossy();
            let s: Vec<f64> = s.iter().map(|v| v.to_f64_lossy()).collect();
            let dims = select_dims(&s, cfg.theta2);
            let extra = (1usize << dims.len()) - 1;
            if score >= cfg.theta1 {
                if count + extra > cfg.max_elements {
                    truncated = true;
                } else {
                    count += extra;
                    events.push(RefinementEvent {
                        time: t.to_f64_lossy(),
                        element: k,
                        indicator: q.to_f64_lossy(),
                        dims: dims.clone(),
                    });
                    for child in split_element(&el, &dims)? {
                        let cs = match cfg.child_init {
                            ChildInit::Project => driver.child_state(&el, &st, &child),
                            ChildInit::Resolve => {
                                let mut c = driver.initial_state(&child);
                                driver.integrate(&mut c, done, T::zero())?;
                                c
                            }
                        };
                        next_el.push(child);
                        next_st.push(cs);
                    }
                    continue;
                }
            }
            next_el.push(el);
            next_st.push(st);
        }
        elements = next_el;
        states = next_st;
    }

    let time = h * T::of_usize(total);
    Ok(DynamicRefinement {
        decomposition: Decomposition::new(elements)?,
        states: states
            .into_iter()
            .map(|coeffs| GalerkinState {
                time,
                n_vars: n,
                coeffs,
            })
            .collect(),
        basis: sys.basis.clone(),
        events,
        truncated,
    })
}
