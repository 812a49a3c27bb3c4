use rayon::prelude::*;

use super::{select_dims, RefinementConfig, RefinementEvent};
use crate::error::Result;
use crate::polybasis::MultiIndex;
use crate::randomspace::{split_element, Decomposition, Element};
use crate::scalar::Scalar;
use crate::surrogate::{build_collocation, local_variance, GpcExpansion, LimitStateModel, MultiElementSurrogate};

const FLOOR: f64 = 1e-14;

/// Decay rate `eta` (top-degree energy over variance) and per-dimension
/// sensitivities `r_j` of an expansion.
pub fn static_indicator<T: Scalar>(exp: &GpcExpansion<T>) -> (T, Vec<T>) {
    let d = exp.dim();
    let n = exp.order();
    if n == 0 {
        return (T::zero(), vec![T::zero(); d]);
    }
    let coeffs = exp.coeffs();
    let top: T = exp.basis().top_degree().map(|k| coeffs[k] * coeffs[k]).sum();
    let var = local_variance(exp);
    let floor = T::of(FLOOR);
    let eta = if var < floor { T::zero() } else { top / var };
    let r = if top < floor {
        vec![T::zero(); d]
    } else {
        (0..d)
            .map(|j| {
                let c = exp.coeff(&MultiIndex::axis(d, j, n));
                c * c / top
            })
            .collect()
    };
    (eta, r)
}

/// `eta^alpha * prob >= theta1`, plus the dimensions to split.
pub fn static_should_split<T: Scalar>(eta: T, r: &[T], prob: T, cfg: &RefinementConfig) -> (bool, Vec<usize>) {
    let score = eta.to_f64_lossy().powf(cfg.alpha) * prob.to_f64_lossy();
    let r: Vec<f64> = r.iter().map(|v| v.to_f64_lossy()).collect();
    (score >= cfg.theta1, select_dims(&r, cfg.theta2))
}

#[derive(Debug, Clone)]
pub struct StaticRefinement<T> {
    pub surrogate: MultiElementSurrogate<T>,
    /// Set when `max_elements` prevented a split the criterion asked for.
    pub truncated: bool,
    pub events: Vec<RefinementEvent>,
}

/// Breadth-first h-refinement with the static criterion.
///
/// Every round builds collocation expansions for the unsettled elements,
/// splits those that meet the criterion and settles the rest. Children are
/// rebuilt from fresh model evaluations.
pub fn adapt_static<T, M>(model: &M, cfg: &RefinementConfig, q: usize) -> Result<StaticRefinement<T>>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
{
    cfg.validate()?;
    let mut work: Vec<(Element<T>, Option<GpcExpansion<T>>)> = vec![(Element::unit(model.dim()), None)];
    let mut truncated = false;
    let mut events = Vec::new();
    let mut round = 0usize;

    while work.iter().any(|(_, e)| e.is_none()) {
        let built: Vec<Option<GpcExpansion<T>>> = work
            .par_iter()
            .map(|(el, exp)| match exp {
                Some(_) => Ok(None),
                None => build_collocation(model, el, cfg.order, q).map(Some),
            })
            .collect::<Result<_>>()?;

        let mut count = work.len();
        let mut next = Vec::with_capacity(work.len());
        for (k, ((el, done), fresh)) in work.into_iter().zip(built).enumerate() {
            let Some(exp) = fresh else {
                next.push((el, done));
                continue;
            };
            let (eta, r) = static_indicator(&exp);
            let (split, dims) = static_should_split(eta, &r, el.prob(), cfg);
            let extra = (1usize << dims.len()) - 1;
            if split && count + extra <= cfg.max_elements {
                count += extra;
                events.push(RefinementEvent {
                    time: round as f64,
                    element: k,
                    indicator: eta.to_f64_lossy(),
                    dims: dims.clone(),
                });
                next.extend(split_element(&el, &dims)?.into_iter().map(|c| (c, None)));
            } else {
                truncated |= split;
                next.push((el, Some(exp)));
            }
        }
        work = next;
        round += 1;
    }

    let (elements, expansions): (Vec<_>, Vec<_>) = work.into_iter().map(|(el, e)| (el, e.expect("settled"))).unzip();
    Ok(StaticRefinement {
        surrogate: MultiElementSurrogate::new(Decomposition::new(elements)?, expansions)?,
        truncated,
        events,
    })
}
