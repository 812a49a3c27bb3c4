//! Failure-probability estimators: plain Monte Carlo, the direct hybrid with a
//! fixed threshold, the iterative hybrid, and its two multi-element variants.
//!
//! All iterative variants keep the failure count as an integer so that the
//! final estimate is exactly `(#failing samples) / m`, where every sample is
//! classified either by the surrogate sign or, once replaced, by the exact sign.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randomspace::SampleSet;
use crate::scalar::Scalar;
use crate::surrogate::{LimitStateModel, MultiElementSurrogate, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Samples moved to the exact model per iteration.
    pub delta_m: usize,
    /// Stop once an iteration changes the estimate by at most this much.
    #[serde(default)]
    pub eta_stop: f64,
    /// Upper bound on exact evaluations over the whole estimation.
    #[serde(default)]
    pub max_exact: Option<u64>,
}

impl HybridConfig {
    pub fn new(delta_m: usize) -> Self {
        Self {
            delta_m,
            eta_stop: 0.0,
            max_exact: None,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.delta_m == 0 || self.delta_m > m {
            return Err(Error::invalid(format!(
                "step size {} must lie in 1..={m}",
                self.delta_m
            )));
        }
        if !(self.eta_stop >= 0.0) {
            return Err(Error::invalid("stopping tolerance must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_f: f64,
    pub n_exact: u64,
    pub n_surrogate: u64,
    pub stddev: f64,
    pub m: usize,
}

impl Estimate {
    fn from_count(failures: u64, m: usize, n_exact: u64, n_surrogate: u64) -> Self {
        let p_f = failures as f64 / m as f64;
        Self {
            p_f,
            n_exact,
            n_surrogate,
            stddev: mc_stddev(p_f, m),
            m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Estimate after this iteration (element contribution for ME-LHA).
    pub estimate: f64,
    /// Exact calls so far, over the whole estimation.
    pub n_exact: u64,
    pub element: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridTrace {
    pub records: Vec<TraceRecord>,
}

impl HybridTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "estimate", "n_exact", "element"])?;
        for r in &self.records {
            out.write_record([
                r.iteration.to_string(),
                format!("{:.9}", r.estimate),
                r.n_exact.to_string(),
                r.element.map(|e| e.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Result of an iterative hybrid run.
#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub estimate: Estimate,
    pub trace: HybridTrace,
    /// `replaced[i]` is true when sample `i` was classified by the exact model.
    pub replaced: Vec<bool>,
}

/// `sqrt(p (1 - p) / m)`.
pub fn mc_stddev(p: f64, m: usize) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}

/// `|p_hat - p_ref| / p_ref`.
pub fn relative_error(p_hat: f64, p_ref: f64) -> Result<f64> {
    if !(p_ref > 0.0) {
        return Err(Error::invalid("reference probability must be positive"));
    }
    Ok((p_hat - p_ref).abs() / p_ref)
}

fn eval_exact<T: Scalar, M: LimitStateModel<T> + ?Sized>(
    model: &M,
    samples: &SampleSet<T>,
    ids: &[usize],
) -> Result<Vec<T>> {
    ids.par_iter().map(|&i| model.evaluate(samples.point(i))).collect()
}

/// Fraction of samples with `g < 0`; every sample costs one exact call.
pub fn mc_estimate<T: Scalar, M: LimitStateModel<T> + ?Sized>(model: &M, samples: &SampleSet<T>) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let failures = samples
        .par_iter()
        .map(|z| model.evaluate(z).map(|g| u64::from(g < T::zero())))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Estimate::from_count(failures, samples.len(), samples.len() as u64, 0))
}

/// Hybrid estimate with a fixed band: the surrogate decides unless `|g~| <= gamma`,
/// in which case the exact model does.
pub fn direct_hybrid<T, M, S>(model: &M, surrogate: &S, samples: &SampleSet<T>, gamma: T) -> Result<Estimate>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
    S: Surrogate<T> + ?Sized,
{
    if !(gamma >= T::zero()) {
        return Err(Error::invalid("gamma must be nonnegative"));
    }
    let (failures, n_exact) = samples
        .par_iter()
        .map(|z| -> Result<(u64, u64)> {
            let s = surrogate.eval(z)?;
            if s.abs() <= gamma {
                Ok((u64::from(model.evaluate(z)? < T::zero()), 1u64))
            } else {
                Ok((u64::from(s < -gamma), 0u64))
            }
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    Ok(Estimate::from_count(
        failures,
        samples.len(),
        n_exact,
        samples.len() as u64,
    ))
}

/// Positions of `members` sorted by `|g~|` ascending, ties by sample index.
fn replacement_order<T: Scalar>(members: &[usize], values: &[T]) -> Vec<usize> {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| {
        values[a]
            .abs()
            .partial_cmp(&values[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

struct LoopState<'a> {
    m: usize,
    cfg: &'a HybridConfig,
    n_exact: u64,
    trace: HybridTrace,
    replaced: Vec<bool>,
}

impl LoopState<'_> {
    fn budget(&self) -> u64 {
        self.cfg
            .max_exact
            .map_or(u64::MAX, |cap| cap.saturating_sub(self.n_exact))
    }

    /// Runs the replacement iteration over `order` starting from `count`
    /// surrogate-predicted failures; returns the corrected count.
    fn iterate<T: Scalar, M: LimitStateModel<T> + ?Sized>(
        &mut self,
        model: &M,
        samples: &SampleSet<T>,
        values: &[T],
        order: &[usize],
        mut count: i64,
        element: Option<usize>,
    ) -> Result<i64> {
        let mut pos = 0;
        let mut iteration = 0;
        while pos < order.len() {
            let budget = self.budget();
            if budget == 0 {
                break;
            }
            let take = self
                .cfg
                .delta_m
                .min(order.len() - pos)
                .min(budget.min(usize::MAX as u64) as usize);
            let block = &order[pos..pos + take];
            let exact = eval_exact(model, samples, block)?;
            let mut change = 0i64;
            for (&i, g) in block.iter().zip(&exact) {
                change += i64::from(*g < T::zero()) - i64::from(values[i] < T::zero());
                self.replaced[i] = true;
            }
            count += change;
            pos += take;
            iteration += 1;
            self.n_exact += take as u64;
            self.trace.records.push(TraceRecord {
                iteration,
                estimate: count as f64 / self.m as f64,
                n_exact: self.n_exact,
                element,
            });
            if (change.unsigned_abs() as f64) / (self.m as f64) <= self.cfg.eta_stop {
                break;
            }
        }
        Ok(count)
    }
}

fn surrogate_values<T: Scalar, S: Surrogate<T> + ?Sized>(surrogate: &S, samples: &SampleSet<T>) -> Result<Vec<T>> {
    samples.par_iter().map(|z| surrogate.eval(z)).collect()
}

/// Iterative hybrid estimator.
///
/// Starts from the surrogate failure fraction, then replaces surrogate
/// classifications by exact ones in blocks of `delta_m` samples, smallest
/// `|g~|` first, until one block leaves the estimate (nearly) unchanged, the
/// samples run out, or the exact-call cap is hit.
pub fn iterative_hybrid<T, M, S>(
    model: &M,
    surrogate: &S,
    samples: &SampleSet<T>,
    cfg: &HybridConfig,
) -> Result<HybridOutcome>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
    S: Surrogate<T> + ?Sized,
{
    let m = samples.len();
    cfg.validate(m)?;
    let values = surrogate_values(surrogate, samples)?;
    let all: Vec<usize> = (0..m).collect();
    let order = replacement_order(&all, &values);
    let initial = values.iter().filter(|v| **v < T::zero()).count() as i64;

    let mut st = LoopState {
        m,
        cfg,
        n_exact: 0,
        trace: HybridTrace::default(),
        replaced: vec![false; m],
    };
    st.trace.records.push(TraceRecord {
        iteration: 0,
        estimate: initial as f64 / m as f64,
        n_exact: 0,
        element: None,
    });
    let count = st.iterate(model, samples, &values, &order, initial, None)?;
    Ok(HybridOutcome {
        estimate: Estimate::from_count(count as u64, m, st.n_exact, m as u64),
        trace: st.trace,
        replaced: st.replaced,
    })
}

/// Global hybrid over a multi-element surrogate: one sort over all samples.
pub fn me_gha<T, M>(
    model: &M,
    s: &MultiElementSurrogate<T>,
    samples: &SampleSet<T>,
    cfg: &HybridConfig,
) -> Result<HybridOutcome>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
{
    iterative_hybrid(model, s, samples, cfg)
}

/// Local hybrid: the iteration runs separately inside every element (with the
/// global `1/m` normalization) and the element contributions are summed.
///
/// Every element holding samples gets at least one iteration. Elements are
/// processed in the given order; `element_order` lets callers permute it.
pub fn me_lha<T, M>(
    model: &M,
    s: &MultiElementSurrogate<T>,
    samples: &SampleSet<T>,
    cfg: &HybridConfig,
) -> Result<HybridOutcome>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
{
    let order: Vec<usize> = (0..s.len()).collect();
    me_lha_ordered(model, s, samples, cfg, &order)
}

pub fn me_lha_ordered<T, M>(
    model: &M,
    s: &MultiElementSurrogate<T>,
    samples: &SampleSet<T>,
    cfg: &HybridConfig,
    element_order: &[usize],
) -> Result<HybridOutcome>
where
    T: Scalar,
    M: LimitStateModel<T> + ?Sized,
{
    let m = samples.len();
    cfg.validate(m)?;
    let located: Vec<(usize, T)> = samples.par_iter().map(|z| s.locate_eval(z)).collect::<Result<_>>()?;
    let values: Vec<T> = located.iter().map(|&(_, v)| v).collect();
    let mut members = vec![Vec::new(); s.len()];
    for (i, &(k, _)) in located.iter().enumerate() {
        members[k].push(i);
    }

    let mut st = LoopState {
        m,
        cfg,
        n_exact: 0,
        trace: HybridTrace::default(),
        replaced: vec![false; m],
    };
    let mut total = 0i64;
    for &k in element_order {
        let ids = &members[k];
        if ids.is_empty() {
            continue;
        }
        let initial = ids.iter().filter(|&&i| values[i] < T::zero()).count() as i64;
        st.trace.records.push(TraceRecord {
            iteration: 0,
            estimate: initial as f64 / m as f64,
            n_exact: st.n_exact,
            element: Some(k),
        });
        let order = replacement_order(ids, &values);
        total += st.iterate(model, samples, &values, &order, initial, Some(k))?;
    }
    Ok(HybridOutcome {
        estimate: Estimate::from_count(total as u64, m, st.n_exact, m as u64),
        trace: st.trace,
        replaced: st.replaced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomspace::{sample_uniform, split_element, Decomposition, Element};
    use crate::surrogate::{CountedModel, FnSurrogate, GpcExpansion};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn step(z: f64) -> f64 {
        if z < 0.0 {
            -1.0
        } else if z == 0.0 {
            -0.5
        } else {
            0.0
        }
    }

    fn exact_step_surrogate() -> MultiElementSurrogate<f64> {
        let kids = split_element(&Element::unit(1), &[0]).unwrap();
        MultiElementSurrogate::new(
            Decomposition::new(kids.clone()).unwrap(),
            vec![
                GpcExpansion::constant(kids[0].clone(), -1.0),
                GpcExpansion::constant(kids[1].clone(), 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn stddev_values() {
        assert_eq!(mc_stddev(0.0, 100), 0.0);
        assert_abs_diff_eq!(mc_stddev(0.5, 100), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(mc_stddev(0.1, 1_000_000), 3e-4, epsilon = 1e-15);
    }

    #[test]
    fn relative_errors() {
        assert_eq!(relative_error(0.1, 0.1).unwrap(), 0.0);
        assert_eq!(relative_error(0.102651, 0.102651).unwrap(), 0.0);
        assert_abs_diff_eq!(relative_error(0.11, 0.10).unwrap(), 0.1, epsilon = 1e-12);
        assert!(matches!(relative_error(0.1, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mc_constant_models() {
        let s = sample_uniform::<f64>(1000, 2, 1).unwrap();
        let fail = CountedModel::new(2, |_z: &[f64]| Ok(-1.0));
        let safe = CountedModel::new(2, |_z: &[f64]| Ok(1.0));
        assert_eq!(mc_estimate(&fail, &s).unwrap().p_f, 1.0);
        let e = mc_estimate(&safe, &s).unwrap();
        assert_eq!(e.p_f, 0.0);
        assert_eq!(e.n_exact, 1000);
        assert_eq!(safe.call_count(), 1000);
    }

    #[test]
    fn mc_step_function() {
        let s = sample_uniform::<f64>(1_000_000, 1, 5).unwrap();
        let m = CountedModel::new(1, |z: &[f64]| Ok(step(z[0])));
        let e = mc_estimate(&m, &s).unwrap();
        assert!((e.p_f - 0.5).abs() < 0.0015, "{}", e.p_f);
    }

    #[test]
    fn direct_hybrid_limits() {
        let s = sample_uniform::<f64>(5000, 1, 9).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok(z[0] - 0.5));
        let sur = FnSurrogate::new(1, |z: &[f64]| z[0] - 0.5 + 0.01);

        let pure = direct_hybrid(&model, &sur, &s, 0.0).unwrap();
        assert_eq!(pure.n_exact, 0);
        let expect = s.iter().filter(|z| z[0] - 0.5 + 0.01 < 0.0).count() as f64 / 5000.0;
        assert_eq!(pure.p_f, expect);

        let full = direct_hybrid(&model, &sur, &s, 10.0).unwrap();
        assert_eq!(full.n_exact, 5000);
        assert_eq!(full.p_f, mc_estimate(&model, &s).unwrap().p_f);

        let band = direct_hybrid(&model, &sur, &s, 0.02).unwrap();
        assert_eq!(band.p_f, mc_estimate(&model, &s).unwrap().p_f);
        assert!(band.n_exact < 5000);
    }

    #[test]
    fn perfect_surrogate_stops_after_one_block() {
        let s = sample_uniform::<f64>(10_000, 1, 3).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok(z[0] * z[0] - 0.25));
        let sur = FnSurrogate::new(1, |z: &[f64]| z[0] * z[0] - 0.25);
        let out = iterative_hybrid(&model, &sur, &s, &HybridConfig::new(100)).unwrap();
        let mc = mc_estimate(&CountedModel::new(1, |z: &[f64]| Ok(z[0] * z[0] - 0.25)), &s).unwrap();
        assert_eq!(out.estimate.p_f, mc.p_f);
        assert_eq!(out.estimate.n_exact, 100);
        assert_eq!(out.trace.records.len(), 2);
        assert_eq!(model.call_count(), 100);
    }

    #[test]
    fn exact_step_surrogate_one_iteration() {
        let s = sample_uniform::<f64>(100_000, 1, 17).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok(step(z[0])));
        let sur = exact_step_surrogate();
        let cfg = HybridConfig::new(1000);
        let gha = me_gha(&model, &sur, &s, &cfg).unwrap();
        assert_eq!(gha.estimate.n_exact, 1000);
        let lha = me_lha(&model, &sur, &s, &cfg).unwrap();
        assert_eq!(lha.estimate.n_exact, 2000);
        assert_eq!(gha.estimate.p_f, lha.estimate.p_f);
        assert_eq!(model.call_count(), 3000);
    }

    #[test]
    fn single_element_reductions() {
        let s = sample_uniform::<f64>(20_000, 1, 23).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok((3.0 * z[0]).sin() - 0.2));
        let exp = GpcExpansion::new(Element::unit(1), 3, vec![-0.2, 0.5, 0.0, -0.2]).unwrap();
        let single = MultiElementSurrogate::single(exp.clone()).unwrap();
        let cfg = HybridConfig::new(250);
        let base = iterative_hybrid(&model, &exp, &s, &cfg).unwrap();
        let gha = me_gha(&model, &single, &s, &cfg).unwrap();
        let lha = me_lha(&model, &single, &s, &cfg).unwrap();
        assert_eq!(base.estimate, gha.estimate);
        assert_eq!(base.estimate.p_f, lha.estimate.p_f);
        assert_eq!(base.estimate.n_exact, lha.estimate.n_exact);
    }

    #[test]
    fn exact_call_cap() {
        let s = sample_uniform::<f64>(10_000, 1, 4).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok(z[0]));
        let sur = FnSurrogate::new(1, |z: &[f64]| -z[0] - 0.5);
        let cfg = HybridConfig {
            delta_m: 300,
            eta_stop: 0.0,
            max_exact: Some(1000),
        };
        let out = iterative_hybrid(&model, &sur, &s, &cfg).unwrap();
        assert_eq!(out.estimate.n_exact, 1000);
        assert_eq!(model.call_count(), 1000);
    }

    #[test]
    fn invalid_step_size() {
        let s = sample_uniform::<f64>(10, 1, 4).unwrap();
        let model = CountedModel::new(1, |z: &[f64]| Ok(z[0]));
        let sur = FnSurrogate::new(1, |z: &[f64]| z[0]);
        assert!(iterative_hybrid(&model, &sur, &s, &HybridConfig::new(0)).is_err());
        assert!(iterative_hybrid(&model, &sur, &s, &HybridConfig::new(11)).is_err());
    }

    fn wiggly_surrogate(amp: f64) -> MultiElementSurrogate<f64> {
        let mut dec = Decomposition::unit(1);
        for k in [0, 1, 0, 3] {
            let kids = split_element(&dec.elements()[k], &[0]).unwrap();
            dec.replace(k, kids);
        }
        let exps = dec
            .elements()
            .iter()
            .enumerate()
            .map(|(k, e)| GpcExpansion::new(e.clone(), 2, vec![0.3 - 0.1 * k as f64, amp, -amp]).unwrap())
            .collect();
        MultiElementSurrogate::new(dec, exps).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn conservation_and_exhaustion(seed in 0u64..10_000, delta in 1usize..400, amp in 0.0f64..0.5) {
            let s = sample_uniform::<f64>(3000, 1, seed).unwrap();
            let g = |z: &[f64]| (4.0 * z[0]).cos() * 0.4 - 0.1 + 0.2 * z[0];
            let model = CountedModel::new(1, |z: &[f64]| Ok(g(z)));
            let sur = wiggly_surrogate(amp);
            let cfg = HybridConfig::new(delta);
            for out in [me_gha(&model, &sur, &s, &cfg).unwrap(), me_lha(&model, &sur, &s, &cfg).unwrap()] {
                // Recount from the classification sets.
                let count = s.iter().enumerate().filter(|(i, z)| {
                    if out.replaced[*i] { g(z) < 0.0 } else { sur.eval(z).unwrap() < 0.0 }
                }).count();
                prop_assert_eq!(out.estimate.p_f, count as f64 / 3000.0);
                prop_assert_eq!(out.estimate.n_exact, out.replaced.iter().filter(|r| **r).count() as u64);
                for w in out.trace.records.windows(2) {
                    if w[1].element == w[0].element {
                        prop_assert!((w[1].estimate - w[0].estimate).abs() <= delta as f64 / 3000.0 + 1e-15);
                        prop_assert!(w[1].n_exact > w[0].n_exact);
                    }
                }
            }

            let mc = mc_estimate(&model, &s).unwrap();
            let full = me_gha(&model, &sur, &s, &HybridConfig::new(3000)).unwrap();
            prop_assert_eq!(full.estimate.p_f, mc.p_f);
            prop_assert_eq!(full.estimate.n_exact, 3000);
            prop_assert!(full.replaced.iter().all(|r| *r));
        }

        #[test]
        fn lha_order_invariance(seed in 0u64..10_000, delta in 1usize..200, rot in 0usize..7) {
            let s = sample_uniform::<f64>(2000, 1, seed).unwrap();
            let model = CountedModel::new(1, |z: &[f64]| Ok(z[0] * z[0] - 0.3));
            let sur = wiggly_surrogate(0.2);
            let cfg = HybridConfig::new(delta);
            let fwd: Vec<usize> = (0..sur.len()).collect();
            let mut perm = fwd.clone();
            perm.rotate_left(rot % sur.len());
            perm.reverse();
            let a = me_lha_ordered(&model, &sur, &s, &cfg, &fwd).unwrap();
            let b = me_lha_ordered(&model, &sur, &s, &cfg, &perm).unwrap();
            prop_assert_eq!(a.estimate.p_f, b.estimate.p_f);
            prop_assert_eq!(a.estimate.n_exact, b.estimate.n_exact);
        }
    }
}
