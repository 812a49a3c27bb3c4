//! Adaptive mesh refinement in random space.
//!
//! Two criteria drive splitting. The static one looks at how much of an
//! element's variance sits in the top polynomial degree; the dynamic one
//! integrates a Galerkin-projected ODE system and watches how much energy the
//! full system moves out of the low modes compared with its truncation.

mod decay;
mod dynamic;
mod galerkin;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decay::{adapt_static, static_indicator, static_should_split, StaticRefinement};
pub use dynamic::{adapt_dynamic, dynamic_indicator, ChildInit, DynamicRefinement, GalerkinState};
pub use galerkin::{galerkin_rhs, rk4_step, GalerkinSystem, PolynomialSystem, Rk4};

/// Thresholds and limits shared by both refinement criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    /// Split threshold. The dynamic criterion's user tolerance maps onto it.
    pub theta1: f64,
    /// Relative threshold selecting which dimensions to split.
    pub theta2: f64,
    /// Exponent on the decay rate in the static criterion.
    pub alpha: f64,
    /// Full expansion order.
    pub order: usize,
    /// Reduced order of the truncated Galerkin system.
    pub reduced_order: usize,
    pub max_elements: usize,
    /// Time between dynamic criterion checks.
    pub check_interval: f64,
    pub child_init: ChildInit,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            theta1: 1e-3,
            theta2: 0.1,
            alpha: 0.5,
            order: 3,
            reduced_order: 2,
            max_elements: 256,
            check_interval: 0.1,
            child_init: ChildInit::Project,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0) {
            return Err(Error::invalid("theta1 must be positive"));
        }
        if !(self.theta2 > 0.0 && self.theta2 < 1.0) {
            return Err(Error::invalid("theta2 must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if self.max_elements == 0 {
            return Err(Error::invalid("max_elements must be at least 1"));
        }
        Ok(())
    }

    fn validate_dynamic(&self) -> Result<()> {
        self.validate()?;
        if self.reduced_order >= self.order {
            return Err(Error::invalid("reduced order must be below the full order"));
        }
        if !(self.check_interval > 0.0) {
            return Err(Error::invalid("check interval must be positive"));
        }
        Ok(())
    }
}

/// One split: when it happened, which element (index in the mesh at that
/// moment), the indicator value that triggered it and the dimensions split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementEvent {
    pub time: f64,
    pub element: usize,
    pub indicator: f64,
    pub dims: Vec<usize>,
}

pub fn write_events_csv<W: Write>(events: &[RefinementEvent], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time", "element", "indicator", "dims"])?;
    for e in events {
        let dims: Vec<String> = e.dims.iter().map(|d| d.to_string()).collect();
        out.write_record([
            format!("{}", e.time),
            e.element.to_string(),
            format!("{:e}", e.indicator),
            dims.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `{i : s_i >= theta2 * max s}`, or `{0}` in one dimension.
fn select_dims(s: &[f64], theta2: f64) -> Vec<usize> {
    if s.len() == 1 {
        return vec![0];
    }
    let max = s.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        // No directional information: split everything.
        return (0..s.len()).collect();
    }
    (0..s.len()).filter(|&i| s[i] >= theta2 * max).collect()
}
