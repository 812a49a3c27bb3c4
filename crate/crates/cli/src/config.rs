use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use megpc::problems::{ProblemName, ProblemParams, ProblemSpec};
use megpc::refine::ChildInit;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mc,
    DirectHybrid,
    GlobalHybrid,
    MeGha,
    MeLha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// One expansion over the whole domain.
    Global,
    /// Refined multi-element surrogate.
    Adaptive,
    /// Closed-form piecewise surrogate (step problem only).
    Exact,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSettings {
    #[serde(alias = "tol1", skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduced_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child_init: Option<ChildInit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
}

/// One estimation run. Unset optional fields take per-problem defaults; the
/// report echoes the fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub method: Method,
    pub m: usize,
    pub seed: u64,
    /// Polynomial order. For the step problem's global surrogate this is the
    /// truncation index `p` of the closed-form series (degree `2p + 1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateKind>,
    #[serde(default)]
    pub refinement: RefinementSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<usize>,
    #[serde(default)]
    pub eta_stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_exact: Option<u64>,
    /// Band half-width, direct-hybrid only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Collocation nodes per dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation_points: Option<usize>,
    /// Quadrature nodes for projecting initial data onto Galerkin elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_nodes: Option<usize>,
    /// Time step of Galerkin integration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Problem parameter overrides, e.g. `{"nu": 0.04}` for burgers.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, Value>,
    /// Reference probability for the relative error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    /// Load the surrogate from this cache instead of building it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Per-problem defaults for the optional fields.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub order: usize,
    pub theta1: f64,
    pub reduced_order: fn(usize) -> usize,
    pub delta_m: usize,
    pub collocation_points: fn(usize) -> usize,
    pub projection_nodes: fn(usize) -> usize,
    pub dt: f64,
    pub check_interval: f64,
}

pub fn defaults(problem: ProblemName) -> Defaults {
    let one_less = |n: usize| n.saturating_sub(1);
    let two_less = |n: usize| n.saturating_sub(2);
    let q_default = |n: usize| n + 2;
    match problem {
        ProblemName::Step => Defaults {
            order: 0,
            theta1: 1e-3,
            reduced_order: one_less,
            delta_m: 1000,
            collocation_points: q_default,
            projection_nodes: q_default,
            dt: 0.01,
            check_interval: 0.1,
        },
        ProblemName::LinearOde => Defaults {
            order: 3,
            theta1: 1e-1,
            reduced_order: one_less,
            delta_m: 100,
            collocation_points: q_default,
            projection_nodes: |_| megpc::problems::RATE_PROJECTION_NODES,
            dt: 0.01,
            check_interval: 0.1,
        },
        ProblemName::Ko3 => Defaults {
            order: 5,
            theta1: 1e-4,
            reduced_order: two_less,
            delta_m: 100,
            collocation_points: q_default,
            projection_nodes: q_default,
            dt: 0.01,
            check_interval: 0.1,
        },
        ProblemName::Burgers => Defaults {
            order: 2,
            theta1: 1e-3,
            reduced_order: one_less,
            delta_m: 100,
            collocation_points: |_| 21,
            projection_nodes: q_default,
            dt: 0.01,
            check_interval: 0.1,
        },
    }
}

impl RunConfig {
    pub fn new(problem: ProblemName, method: Method, m: usize, seed: u64) -> Self {
        Self {
            problem,
            method,
            m,
            seed,
            order: None,
            surrogate: None,
            refinement: RefinementSettings::default(),
            delta_m: None,
            eta_stop: 0.0,
            max_exact: None,
            gamma: None,
            collocation_points: None,
            projection_nodes: None,
            dt: None,
            params: serde_json::Map::new(),
            reference: None,
            cache: None,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))
    }

    /// Reads a JSON config and applies `key=value` overrides (dotted keys
    /// address nested fields; values parse as JSON, else as strings).
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| anyhow!("invalid config: {e}"))
    }

    pub fn surrogate_kind(&self) -> Option<SurrogateKind> {
        match self.method {
            Method::Mc => None,
            Method::DirectHybrid | Method::GlobalHybrid => Some(self.surrogate.unwrap_or(SurrogateKind::Global)),
            Method::MeGha | Method::MeLha => Some(self.surrogate.unwrap_or(SurrogateKind::Adaptive)),
        }
    }

    /// Fills every optional field with its default and checks consistency.
    pub fn resolve(&self) -> Result<Self> {
        let d = defaults(self.problem);
        let mut c = self.clone();
        if c.m == 0 {
            bail!("invalid config: field `m` must be positive");
        }
        if c.method == Method::DirectHybrid && c.gamma.is_none() {
            bail!("invalid config: field `gamma` is required for direct-hybrid");
        }
        if c.method != Method::DirectHybrid && c.gamma.is_some() {
            bail!("invalid config: field `gamma` only applies to direct-hybrid");
        }
        if c.surrogate == Some(SurrogateKind::Exact) && c.problem != ProblemName::Step {
            bail!(
                "invalid config: field `surrogate`: no exact surrogate for {}",
                c.problem
            );
        }
        c.surrogate = c.surrogate_kind();
        let order = *c.order.get_or_insert(d.order);
        if c.method != Method::Mc {
            let r = &mut c.refinement;
            r.theta1.get_or_insert(d.theta1);
            r.theta2.get_or_insert(0.1);
            r.alpha.get_or_insert(0.5);
            r.reduced_order.get_or_insert((d.reduced_order)(order));
            r.max_elements.get_or_insert(256);
            r.check_interval.get_or_insert(d.check_interval);
            r.child_init.get_or_insert(ChildInit::Project);
            c.collocation_points.get_or_insert((d.collocation_points)(order));
            c.projection_nodes.get_or_insert((d.projection_nodes)(order));
            c.dt.get_or_insert(d.dt);
            let dm = *c.delta_m.get_or_insert(d.delta_m.min(c.m));
            if dm == 0 || dm > c.m {
                bail!("invalid config: field `delta_m` must lie in 1..=m");
            }
        }
        if !(c.eta_stop >= 0.0) {
            bail!("invalid config: field `eta_stop` must be nonnegative");
        }
        c.problem_spec()?;
        Ok(c)
    }

    /// Problem definition with parameter overrides applied.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::new(self.problem);
        if !self.params.is_empty() {
            let mut v = serde_json::to_value(spec.params)?;
            let obj = v.as_object_mut().expect("params serialize as an object");
            for (k, val) in &self.params {
                if k == "name" || !obj.contains_key(k) {
                    bail!(
                        "invalid config: field `params.{k}` is not a parameter of {}",
                        self.problem
                    );
                }
                obj.insert(k.clone(), val.clone());
            }
            spec.params = serde_json::from_value::<ProblemParams>(v)
                .map_err(|e| anyhow!("invalid config: field `params`: {e}"))?;
        }
        if let Some(r) = self.reference {
            if !(r > 0.0 && r < 1.0) {
                bail!("invalid config: field `reference` must lie in (0, 1)");
            }
            spec.reference.value = r;
        }
        Ok(spec)
    }
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("invalid override '{assignment}': expected key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("invalid override '{key}': '{part}' is not inside an object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({"problem": "ko3", "method": "me-gha", "m": 1000, "seed": 7})
    }

    #[test]
    fn overrides_nested_and_scalar() {
        let mut v = base();
        apply_override(&mut v, "refinement.tol1=1e-5").unwrap();
        apply_override(&mut v, "m=50").unwrap();
        apply_override(&mut v, "method=me-lha").unwrap();
        let c: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(c.refinement.theta1, Some(1e-5));
        assert_eq!(c.m, 50);
        assert_eq!(c.method, Method::MeLha);
        assert!(apply_override(&mut base(), "novalue").is_err());
    }

    #[test]
    fn resolution_fills_defaults() {
        let c: RunConfig = serde_json::from_value(base()).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.order, Some(5));
        assert_eq!(r.refinement.reduced_order, Some(3));
        assert_eq!(r.surrogate, Some(SurrogateKind::Adaptive));
        assert_eq!(r.delta_m, Some(100));
        assert_eq!(r.resolve().unwrap(), r);
    }

    #[test]
    fn errors_name_the_field() {
        let mut v = base();
        v["method"] = "direct-hybrid".into();
        let c: RunConfig = serde_json::from_value(v).unwrap();
        assert!(c.resolve().unwrap_err().to_string().contains("gamma"));

        let mut v = base();
        v.as_object_mut().unwrap().remove("seed");
        let e = serde_json::from_value::<RunConfig>(v).unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");

        let mut v = base();
        v["tehta1"] = 1.0.into();
        assert!(serde_json::from_value::<RunConfig>(v)
            .unwrap_err()
            .to_string()
            .contains("tehta1"));

        let mut c: RunConfig = serde_json::from_value(base()).unwrap();
        c.params.insert("viscosity".into(), 0.1.into());
        assert!(c.resolve().unwrap_err().to_string().contains("params.viscosity"));
    }

    #[test]
    fn parameter_overrides_apply() {
        let mut c = RunConfig::new(ProblemName::Burgers, Method::Mc, 10, 1);
        c.params.insert("nu".into(), 0.04.into());
        match c.problem_spec().unwrap().params {
            ProblemParams::Burgers(p) => assert_eq!(p.nu, 0.04),
            _ => unreachable!(),
        }
    }
}
