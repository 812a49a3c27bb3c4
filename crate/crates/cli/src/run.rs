use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use megpc::estimator::{self, HybridConfig, HybridTrace};
use megpc::problems::{
    ko_galerkin_system, ko_initial, ode_galerkin_system, ode_initial, step_global_gpc, step_me_surrogate,
    ProblemParams, ProblemSpec, ReferenceValue,
};
use megpc::randomspace::{sample_uniform, Element};
use megpc::refine::{adapt_dynamic, adapt_static, write_events_csv, GalerkinSystem, RefinementConfig, RefinementEvent};
use megpc::surrogate::{build_collocation, LimitStateModel, MultiElementSurrogate, SurrogateCache};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig, SurrogateKind};

/// A surrogate together with what it cost to build.
#[derive(Debug, Clone)]
pub struct BuiltSurrogate {
    pub surrogate: MultiElementSurrogate<f64>,
    pub events: Vec<RefinementEvent>,
    pub truncated: bool,
    /// Exact-model calls spent on collocation.
    pub construction_calls: u64,
}

impl BuiltSurrogate {
    fn plain(surrogate: MultiElementSurrogate<f64>) -> Self {
        Self {
            surrogate,
            events: Vec::new(),
            truncated: false,
            construction_calls: 0,
        }
    }
}

fn refinement_config(cfg: &RunConfig, order: usize, global: bool) -> RefinementConfig {
    let r = &cfg.refinement;
    RefinementConfig {
        theta1: if global {
            f64::INFINITY
        } else {
            r.theta1.expect("resolved")
        },
        theta2: r.theta2.expect("resolved"),
        alpha: r.alpha.expect("resolved"),
        order,
        reduced_order: r.reduced_order.expect("resolved"),
        max_elements: r.max_elements.expect("resolved"),
        check_interval: r.check_interval.expect("resolved"),
        child_init: r.child_init.expect("resolved"),
    }
}

fn dynamic<I>(
    sys: &GalerkinSystem<f64>,
    init: &I,
    cfg: &RunConfig,
    rc: &RefinementConfig,
    t: f64,
    var: usize,
    shift: f64,
) -> Result<BuiltSurrogate>
where
    I: Fn(&[f64], &mut [f64]) + Sync,
{
    let out = adapt_dynamic(
        sys,
        init,
        rc,
        t,
        cfg.dt.expect("resolved"),
        cfg.projection_nodes.expect("resolved"),
    )?;
    Ok(BuiltSurrogate {
        surrogate: out.surrogate(var, shift)?,
        events: out.events,
        truncated: out.truncated,
        construction_calls: 0,
    })
}

/// Builds the surrogate a resolved configuration asks for. `model` is used
/// (and its calls counted) only for collocation-based surrogates.
pub fn build_surrogate(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    model: &dyn LimitStateModel<f64>,
) -> Result<BuiltSurrogate> {
    let kind = cfg.surrogate.context("method needs no surrogate")?;
    let order = cfg.order.expect("resolved");
    let global = kind == SurrogateKind::Global;
    let q = cfg.collocation_points.expect("resolved");
    let before = model.call_count();
    let collocate = |global: bool| -> Result<BuiltSurrogate> {
        if global {
            let exp = build_collocation(model, &Element::unit(1), order, q)?;
            Ok(BuiltSurrogate::plain(MultiElementSurrogate::single(exp)?))
        } else {
            let out = adapt_static(model, &refinement_config(cfg, order, false), q)?;
            Ok(BuiltSurrogate {
                surrogate: out.surrogate,
                events: out.events,
                truncated: out.truncated,
                construction_calls: 0,
            })
        }
    };
    let mut built = match (spec.params, kind) {
        (ProblemParams::Step, SurrogateKind::Exact) => BuiltSurrogate::plain(step_me_surrogate()),
        (ProblemParams::Step, SurrogateKind::Global) => {
            BuiltSurrogate::plain(MultiElementSurrogate::single(step_global_gpc(order))?)
        }
        (ProblemParams::Step, SurrogateKind::Adaptive) => collocate(false)?,
        (ProblemParams::Burgers(_), _) => collocate(global)?,
        (ProblemParams::LinearOde(p), _) => {
            let rc = refinement_config(cfg, order, global);
            let sys = ode_galerkin_system(order, rc.reduced_order)?;
            dynamic(&sys, &ode_initial(p), cfg, &rc, p.final_time, 0, p.u_d)?
        }
        (ProblemParams::Ko3(p), _) => {
            let rc = refinement_config(cfg, order, global);
            let sys = ko_galerkin_system(order, rc.reduced_order)?;
            dynamic(&sys, &ko_initial(p), cfg, &rc, p.final_time, 0, p.u_d)?
        }
    };
    built.construction_calls = model.call_count() - before;
    Ok(built)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub estimate: f64,
    pub stddev: f64,
    pub n_exact: u64,
    pub n_surrogate: u64,
    pub m: usize,
    /// Elements of the surrogate (0 for plain Monte Carlo).
    pub elements: usize,
    pub construction_calls: u64,
    pub truncated: bool,
    pub reference: ReferenceValue,
    pub relative_error: f64,
    pub wall_time_s: f64,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Option<HybridTrace>,
    pub surrogate: Option<BuiltSurrogate>,
}

/// Executes one configuration; no files are written.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let cfg = config.resolve()?;
    let spec = cfg.problem_spec()?;
    let model = spec.model();
    let built = match (&cfg.cache, cfg.method) {
        (_, Method::Mc) => None,
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(BuiltSurrogate::plain(MultiElementSurrogate::from_cache(
                &SurrogateCache::from_json(&text)?,
            )?))
        }
        (None, _) => Some(build_surrogate(&cfg, &spec, model.as_ref())?),
    };
    let samples = sample_uniform::<f64>(cfg.m, spec.dim(), cfg.seed)?;
    let hybrid = || HybridConfig {
        delta_m: cfg.delta_m.expect("resolved"),
        eta_stop: cfg.eta_stop,
        max_exact: cfg.max_exact,
    };

    let before = model.call_count();
    let (estimate, trace) = match (cfg.method, &built) {
        (Method::Mc, _) => (estimator::mc_estimate(model.as_ref(), &samples)?, None),
        (Method::DirectHybrid, Some(b)) => (
            estimator::direct_hybrid(model.as_ref(), &b.surrogate, &samples, cfg.gamma.expect("resolved"))?,
            None,
        ),
        (Method::GlobalHybrid | Method::MeGha, Some(b)) => {
            let out = estimator::me_gha(model.as_ref(), &b.surrogate, &samples, &hybrid())?;
            (out.estimate, Some(out.trace))
        }
        (Method::MeLha, Some(b)) => {
            let out = estimator::me_lha(model.as_ref(), &b.surrogate, &samples, &hybrid())?;
            (out.estimate, Some(out.trace))
        }
        _ => unreachable!("surrogate built for every hybrid method"),
    };
    let calls = model.call_count() - before;
    if calls != estimate.n_exact {
        bail!(
            "exact-call accounting mismatch: estimator reports {}, model counted {calls}",
            estimate.n_exact
        );
    }

    let report = RunReport {
        estimate: estimate.p_f,
        stddev: estimate.stddev,
        n_exact: estimate.n_exact,
        n_surrogate: estimate.n_surrogate,
        m: estimate.m,
        elements: built.as_ref().map_or(0, |b| b.surrogate.len()),
        construction_calls: built.as_ref().map_or(0, |b| b.construction_calls),
        truncated: built.as_ref().is_some_and(|b| b.truncated),
        reference: spec.reference,
        relative_error: estimator::relative_error(estimate.p_f, spec.reference.value)?,
        wall_time_s: start.elapsed().as_secs_f64(),
        config: cfg,
    };
    Ok(RunOutput {
        report,
        trace,
        surrogate: built,
    })
}

/// Writes the report, trace, surrogate cache and refinement events to the
/// paths named in the configuration.
pub fn write_outputs(out: &RunOutput) -> Result<()> {
    let paths = &out.report.config.output;
    if let Some(p) = &paths.report {
        std::fs::write(p, serde_json::to_string_pretty(&out.report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let (Some(p), Some(t)) = (&paths.trace, &out.trace) {
        t.write_csv(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        ))?;
    }
    if let (Some(p), Some(b)) = (&paths.cache, &out.surrogate) {
        std::fs::write(p, b.surrogate.to_cache().to_json()?).with_context(|| format!("writing {}", p.display()))?;
    }
    if let (Some(p), Some(b)) = (&paths.events, &out.surrogate) {
        write_events_csv(
            &b.events,
            BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use megpc::problems::ProblemName;

    #[test]
    fn step_exact_surrogate_single_block() {
        let mut c = RunConfig::new(ProblemName::Step, Method::MeGha, 100_000, 3);
        c.surrogate = Some(SurrogateKind::Exact);
        c.delta_m = Some(1000);
        let out = run(&c).unwrap();
        assert_eq!(out.report.n_exact, 1000);
        assert_eq!(out.report.elements, 2);
        assert!((out.report.estimate - 0.5).abs() < 3.0 * out.report.stddev.max(1.0 / 632.0));
    }

    #[test]
    fn burgers_construction_calls_are_counted() {
        let mut c = RunConfig::new(ProblemName::Burgers, Method::GlobalHybrid, 2000, 1);
        c.order = Some(3);
        let out = run(&c).unwrap();
        assert_eq!(out.report.construction_calls, 21);
        assert_eq!(out.report.elements, 1);
    }

    #[test]
    fn report_is_reproducible() {
        let mut c = RunConfig::new(ProblemName::LinearOde, Method::MeLha, 20_000, 9);
        c.order = Some(3);
        let a = run(&c).unwrap();
        let b = run(&a.report.config).unwrap();
        let strip = |mut r: RunReport| {
            r.wall_time_s = 0.0;
            r
        };
        assert_eq!(strip(a.report), strip(b.report));
        assert_eq!(a.trace, b.trace);
    }
}
