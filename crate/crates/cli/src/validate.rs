//! Fast invariant checks behind `megpc validate`.

use std::path::Path;

use anyhow::{Context, Result};
use megpc::estimator::{self, HybridConfig};
use megpc::polybasis::{gauss_legendre, IndexSet, TensorGrid};
use megpc::problems::{
    burgers_residual, burgers_transition, burgers_transition_z, ko_integrate, step_global_gpc, ProblemName, ProblemSpec,
};
use megpc::randomspace::{sample_uniform, split_element, Decomposition, Element, SampleSet};
use megpc::refine::{GalerkinSystem, PolynomialSystem, Rk4};
use megpc::surrogate::{gamma_bound, LimitStateModel, MultiElementSurrogate, Surrogate, SurrogateCache};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }

    /// Runs `f`, turning an error into a failed check.
    fn run(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Self {
        match f() {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e:#}")),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn orthonormality() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let set = IndexSet::new(d, 8)?;
        let grid = TensorGrid::<f64>::gauss(9, d)?;
        let p = set.len();
        let mut gram = vec![0.0; p * p];
        let mut phi = vec![0.0; p];
        for (x, w) in grid.points() {
            set.eval_basis(&x, &mut phi);
            for i in 0..p {
                for j in 0..p {
                    gram[i * p + j] += w * phi[i] * phi[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                worst = worst.max((gram[i * p + j] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    Ok((
        worst < 1e-12,
        format!("max Gram deviation {worst:.1e} (d <= 3, order 8)"),
    ))
}

fn quadrature_exactness() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for q in 1..=40 {
        let r = gauss_legendre::<f64>(q)?;
        for k in 0..2 * q {
            let exact = if k % 2 == 0 { 1.0 / (k as f64 + 1.0) } else { 0.0 };
            let got = r.integrate(|x| x.powi(k as i32));
            let err = if exact == 0.0 {
                got.abs()
            } else {
                ((got - exact) / exact).abs()
            };
            worst = worst.max(err);
        }
    }
    Ok((worst < 1e-13, format!("max monomial error {worst:.1e} (q <= 40)")))
}

fn partition_of_unity() -> Result<(bool, String)> {
    // Repeatedly split the element containing a moving point, cycling dims.
    let mut elements = vec![Element::<f64>::unit(3)];
    let pts = sample_uniform::<f64>(40, 3, 5)?;
    for (n, z) in pts.iter().enumerate() {
        let dec = Decomposition::from_parts_unchecked(elements.clone());
        let id = dec.locate(z)?;
        let dims: Vec<usize> = (0..=(n % 3)).collect();
        let kids = split_element(&elements[id], &dims)?;
        elements.splice(id..=id, kids);
    }
    let dec = Decomposition::new(elements)?;
    let err = (dec.total_prob() - 1.0).abs();
    let defects = dec.check_partition();
    Ok((
        err < 1e-12 && defects.is_empty(),
        format!("{} elements, |sum prob - 1| = {err:.1e}", dec.len()),
    ))
}

type StepSetup = (
    Box<dyn LimitStateModel<f64>>,
    MultiElementSurrogate<f64>,
    SampleSet<f64>,
);

fn step_setup(m: usize, seed: u64) -> Result<StepSetup> {
    let model = ProblemSpec::new(ProblemName::Step).model();
    let s = MultiElementSurrogate::single(step_global_gpc(2))?;
    Ok((model, s, sample_uniform(m, 1, seed)?))
}

fn full_replacement() -> Result<(bool, String)> {
    let (model, s, samples) = step_setup(20_000, 17)?;
    let mc = estimator::mc_estimate(model.as_ref(), &samples)?;
    let all = estimator::me_gha(model.as_ref(), &s, &samples, &HybridConfig::new(samples.len()))?.estimate;
    let direct = estimator::direct_hybrid(model.as_ref(), &s, &samples, f64::INFINITY)?;
    let ok = all.p_f == mc.p_f && direct.p_f == mc.p_f && all.n_exact == 20_000;
    Ok((
        ok,
        format!("MC {} / full hybrid {} / infinite band {}", mc.p_f, all.p_f, direct.p_f),
    ))
}

fn hybrid_recount() -> Result<(bool, String)> {
    // Every sample is classified by exactly one sign, exact if replaced.
    let (model, s, samples) = step_setup(20_000, 23)?;
    let cfg = HybridConfig::new(300);
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, out) in [
        ("GHA", estimator::me_gha(model.as_ref(), &s, &samples, &cfg)?),
        ("LHA", estimator::me_lha(model.as_ref(), &s, &samples, &cfg)?),
    ] {
        let mut fails = 0u64;
        for (z, &r) in samples.iter().zip(&out.replaced) {
            let v = if r { model.evaluate(z)? } else { s.eval(z)? };
            fails += u64::from(v < 0.0);
        }
        let n_replaced = out.replaced.iter().filter(|&&r| r).count() as u64;
        ok &= fails as f64 / samples.len() as f64 == out.estimate.p_f && n_replaced == out.estimate.n_exact;
        detail.push(format!(
            "{name} {} with {} exact",
            out.estimate.p_f, out.estimate.n_exact
        ));
    }
    Ok((ok, detail.join(", ")))
}

fn linear_closure() -> Result<(bool, String)> {
    let mut sys = PolynomialSystem::new(2);
    sys.add_term(0, -2.0, &[0])?
        .add_term(0, 0.5, &[1])?
        .add_term(1, 1.0, &[0])?;
    let g = GalerkinSystem::new(sys, 1, 6, 3)?;
    let state: Vec<f64> = (0..g.full_len() * g.n_vars())
        .map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4)
        .collect();
    let (q, s) = g.indicator(&state);
    let worst = s.iter().fold(q, |a, &b| a.max(b.abs()));
    Ok((worst < 1e-10, format!("max(Q, s_i) = {worst:.1e}")))
}

fn ko_conservation() -> Result<(bool, String)> {
    let xs = sample_uniform::<f64>(20, 1, 77)?;
    let mut worst: f64 = 0.0;
    for xi in xs.iter().map(|x| x[0]) {
        let c0 = 0.1 * xi;
        let e0 = 1.0 + c0 * c0;
        ko_integrate([1.0, c0, 0.0], 15.0, 0.01, |_, y| {
            worst = worst.max((y[0] * y[1] - c0).abs());
            worst = worst.max((y[0] * y[0] + y[1] * y[1] + y[2] * y[2] - e0).abs());
        })?;
    }
    Ok((worst < 1e-8, format!("max drift of y1*y2 and |y|^2 {worst:.1e}")))
}

fn rk4_order() -> Result<(bool, String)> {
    let err = |dt: f64| {
        let mut y = [1.0];
        let mut rk = Rk4::new(1);
        let mut f = |u: &[f64], du: &mut [f64]| du[0] = -u[0];
        for _ in 0..(1.0 / dt).round() as usize {
            rk.step(&mut f, &mut y, dt);
        }
        (y[0] - (-1.0f64).exp()).abs()
    };
    let ratios: Vec<f64> = [0.1, 0.05, 0.02].iter().map(|&dt| err(dt) / err(dt / 2.0)).collect();
    let ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));
    Ok((ok, format!("error ratios {ratios:.2?}")))
}

fn gamma_property() -> Result<(bool, String)> {
    // With eps_p measured on the very samples used, the Chebyshev argument
    // makes |direct hybrid - MC| <= eps hold sample by sample.
    let eps = 0.05;
    let p = 2.0;
    let model = ProblemSpec::new(ProblemName::Step).model();
    let s = MultiElementSurrogate::single(step_global_gpc(7))?;
    let (mut worst, mut gmin, mut gmax, mut exact_share) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for seed in 0..20 {
        let samples = sample_uniform::<f64>(20_000, 1, 1000 + seed)?;
        let mut acc = 0.0;
        for z in samples.iter() {
            acc += (model.evaluate(z)? - s.eval(z)?).abs().powf(p);
        }
        let eps_p = (acc / samples.len() as f64).powf(1.0 / p);
        let gamma = gamma_bound(eps_p, eps, p)?;
        let mc = estimator::mc_estimate(model.as_ref(), &samples)?;
        let dh = estimator::direct_hybrid(model.as_ref(), &s, &samples, gamma)?;
        worst = worst.max((dh.p_f - mc.p_f).abs());
        gmin = gmin.min(gamma);
        gmax = gmax.max(gamma);
        exact_share = exact_share.max(dh.n_exact as f64 / samples.len() as f64);
    }
    Ok((
        worst <= eps,
        format!(
            "max |hybrid - MC| {worst:.2e} <= {eps} over 20 seeds (gamma {gmin:.3}..{gmax:.3}, at most {:.0}% exact)",
            100.0 * exact_share
        ),
    ))
}

fn burgers() -> Result<(bool, String)> {
    let pts = sample_uniform::<f64>(1000, 2, 11)?;
    let mut worst: f64 = 0.0;
    for z in pts.iter() {
        let delta = 0.05 * (z[0] + 1.0);
        let nu = 0.05 + 0.04 * z[1];
        let (a, zz) = burgers_transition(delta, nu)?;
        let r = burgers_residual(a, zz, delta, nu);
        worst = worst.max(r[0].hypot(r[1]));
    }
    let z0 = burgers_transition_z(0.0, 0.05)?;
    let zs = (0..=1000)
        .map(|i| burgers_transition_z(i as f64 * 1e-4, 0.05))
        .collect::<megpc::Result<Vec<_>>>()?;
    let monotone = zs.windows(2).all(|w| w[1] > w[0]);
    let ok = worst < 1e-12 && z0.abs() < 1e-12 && monotone;
    Ok((
        ok,
        format!("max residual {worst:.1e}, z(0) = {z0:.1e}, monotone on 1e-4 grid: {monotone}"),
    ))
}

/// The built-in invariant suite.
pub fn checks() -> Vec<Check> {
    vec![
        Check::run("orthonormality", orthonormality),
        Check::run("quadrature exactness", quadrature_exactness),
        Check::run("partition of unity", partition_of_unity),
        Check::run("hybrid exhaustion", full_replacement),
        Check::run("hybrid recount", hybrid_recount),
        Check::run("linear closure", linear_closure),
        Check::run("KO conservation", ko_conservation),
        Check::run("RK4 order", rk4_order),
        Check::run("gamma bound", gamma_property),
        Check::run("Burgers solver", burgers),
    ]
}

/// Partition check of a cached surrogate; defects name the offending elements.
pub fn check_cache(path: &Path) -> Check {
    Check::run("cache partition", || {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cache = SurrogateCache::<f64>::from_json(&text)?;
        let defects = cache.raw_decomposition().check_partition();
        if defects.is_empty() {
            MultiElementSurrogate::from_cache(&cache)?;
            Ok((true, format!("{} elements", cache.raw_decomposition().len())))
        } else {
            Ok((
                false,
                defects.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in checks() {
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn line_format() {
        assert_eq!(Check::new("x", false, "bad").line(), "FAIL x: bad");
    }
}
