//! Three-mode Kraichnan-Orszag system with a random initial condition.
//!
//! The transformed form integrated here is
//! `y1' = y1 y3`, `y2' = -y2 y3`, `y3' = -y1^2 + y2^2`,
//! started from `(1, a xi, 0)`; `y1 y2` is conserved along trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{GalerkinSystem, PolynomialSystem, Rk4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KoParams {
    pub final_time: f64,
    /// Failure threshold on `y1(T)`.
    pub u_d: f64,
    pub dt: f64,
    /// Scale of the random initial `y2`.
    pub amplitude: f64,
}

impl Default for KoParams {
    fn default() -> Self {
        Self {
            final_time: 15.0,
            u_d: 0.03,
            dt: 0.01,
            amplitude: 0.1,
        }
    }
}

pub fn ko_rhs(y: &[f64], dy: &mut [f64]) {
    dy[0] = y[0] * y[2];
    dy[1] = -y[1] * y[2];
    dy[2] = -y[0] * y[0] + y[1] * y[1];
}

/// Integrates from `y0` over `[0, final_time]` with RK4, calling `observe(t, y)`
/// after every step.
pub fn ko_integrate<F: FnMut(f64, &[f64; 3])>(
    y0: [f64; 3],
    final_time: f64,
    dt: f64,
    mut observe: F,
) -> Result<[f64; 3]> {
    if !(dt > 0.0 && final_time >= 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let n = (final_time / dt).round() as usize;
    let h = if n == 0 { 0.0 } else { final_time / n as f64 };
    let mut y = y0;
    let mut rk = Rk4::new(3);
    let mut f = ko_rhs;
    for s in 1..=n {
        rk.step(&mut f, &mut y, h);
        let t = s as f64 * h;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: "non-finite state".into(),
            });
        }
        observe(t, &y);
    }
    Ok(y)
}

/// `y1(T) - u_d` for the trajectory started at `(1, amplitude * xi, 0)`.
pub fn ko_limit_state(xi: f64, params: &KoParams) -> Result<f64> {
    if !(xi.abs() <= 1.0) {
        return Err(Error::domain(format!("xi = {xi} outside [-1, 1]")));
    }
    let y = ko_integrate(
        [1.0, params.amplitude * xi, 0.0],
        params.final_time,
        params.dt,
        |_, _| {},
    )?;
    Ok(y[0] - params.u_d)
}

/// Galerkin form of the system over one random dimension.
pub fn ko_galerkin_system(order: usize, reduced_order: usize) -> Result<GalerkinSystem<f64>> {
    let mut sys = PolynomialSystem::new(3);
    sys.add_term(0, 1.0, &[0, 2])?;
    sys.add_term(1, -1.0, &[1, 2])?;
    sys.add_term(2, -1.0, &[0, 0])?.add_term(2, 1.0, &[1, 1])?;
    GalerkinSystem::new(sys, 1, order, reduced_order)
}

pub fn ko_initial(params: KoParams) -> impl Fn(&[f64], &mut [f64]) + Sync {
    move |xi: &[f64], out: &mut [f64]| {
        out[0] = 1.0;
        out[1] = params.amplitude * xi[0];
        out[2] = 0.0;
    }
}
