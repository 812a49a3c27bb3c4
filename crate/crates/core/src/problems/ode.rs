//! Scalar decay `du/dt = -Z u` with a normally distributed rate `Z`.

use serde::{Deserialize, Serialize};

use super::special::{gaussian_from_uniform, normal_tail};
use crate::error::{Error, Result};
use crate::polybasis::{gauss_legendre, orthonormal_legendre_all};
use crate::refine::{GalerkinSystem, PolynomialSystem};

/// Minimum number of Gauss nodes used to project the rate.
pub const RATE_PROJECTION_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeParams {
    pub u0: f64,
    pub final_time: f64,
    /// Failure threshold on `u(T)`.
    pub u_d: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for OdeParams {
    fn default() -> Self {
        Self {
            u0: 1.0,
            final_time: 1.0,
            u_d: 0.5,
            mu: -2.0,
            sigma: 1.0,
        }
    }
}

impl OdeParams {
    /// Rate `Z` as a function of the uniform input on `(-1, 1)`.
    pub fn rate(&self, x: f64) -> Result<f64> {
        gaussian_from_uniform(x, self.mu, self.sigma)
    }

    /// Exact `P(u(T) < u_d)`: failure means `Z > ln(u0/u_d)/T`.
    pub fn tail_probability(&self) -> f64 {
        let threshold = (self.u0 / self.u_d).ln() / self.final_time;
        normal_tail((threshold - self.mu) / self.sigma)
    }
}

/// `u0 exp(-Z T) - u_d` from the closed-form solution.
pub fn ode_limit_state(x: f64, params: &OdeParams) -> Result<f64> {
    let z = params.rate(x)?;
    Ok(params.u0 * (-z * params.final_time).exp() - params.u_d)
}

/// Orthonormal Legendre coefficients `k_0..=k_p` of the rate over `[-1, 1]`.
pub fn z_legendre_coeffs(p: usize, params: &OdeParams, nodes: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::invalid("expansion order must be at least 1"));
    }
    let rule = gauss_legendre::<f64>(nodes.max(RATE_PROJECTION_NODES))?;
    let mut k = vec![0.0; p + 1];
    let mut phi = vec![0.0; p + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let z = params.rate(x)?;
        orthonormal_legendre_all(x, &mut phi);
        for (c, &f) in k.iter_mut().zip(&phi) {
            *c += w * z * f;
        }
    }
    Ok(k)
}

/// Galerkin form of the decay: variable 0 is `u`, variable 1 the rate parameter.
pub fn ode_galerkin_system(order: usize, reduced_order: usize) -> Result<GalerkinSystem<f64>> {
    let mut sys = PolynomialSystem::new(2);
    sys.add_term(0, -1.0, &[1, 0])?;
    sys.mark_parameter(1)?;
    GalerkinSystem::new(sys, 1, order, reduced_order)
}

/// Initial data for [`ode_galerkin_system`]: `u = u0`, rate from the exact transform.
pub fn ode_initial(params: OdeParams) -> impl Fn(&[f64], &mut [f64]) + Sync {
    move |x: &[f64], out: &mut [f64]| {
        out[0] = params.u0;
        out[1] = params.rate(x[0]).unwrap_or(f64::NAN);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::orthonormal_legendre;
    use approx::assert_abs_diff_eq;

    #[test]
    fn limit_state_values() {
        let p = OdeParams::default();
        assert_abs_diff_eq!(ode_limit_state(0.0, &p).unwrap(), 2f64.exp() - 0.5, epsilon = 1e-13);
        assert!(ode_limit_state(1.0, &p).is_err());
        assert_abs_diff_eq!(p.tail_probability(), 0.003_539_050_8, epsilon = 1e-10);
    }

    #[test]
    fn failure_threshold() {
        let p = OdeParams::default();
        // Z = ln 2 on the boundary.
        let x = libm::erf((2f64.ln() + 2.0) / std::f64::consts::SQRT_2);
        assert!(ode_limit_state(x - 1e-9, &p).unwrap() > 0.0);
        assert!(ode_limit_state(x + 1e-9, &p).unwrap() < 0.0);
    }

    #[test]
    fn rate_coefficients() {
        let p = OdeParams::default();
        let k = z_legendre_coeffs(7, &p, 64).unwrap();
        assert_abs_diff_eq!(k[0], -2.0, epsilon = 1e-12);
        let centred = OdeParams { mu: 0.0, ..p };
        let k = z_legendre_coeffs(8, &centred, 64).unwrap();
        for i in (2..=8).step_by(2) {
            assert!(k[i].abs() < 1e-14, "k[{i}] = {}", k[i]);
        }
    }

    #[test]
    fn reconstruction_error_decreases() {
        let p = OdeParams::default();
        let rule = gauss_legendre::<f64>(200).unwrap();
        let err = |order: usize| {
            let k = z_legendre_coeffs(order, &p, 128).unwrap();
            rule.integrate(|x| {
                let approx: f64 = (0..=order).map(|i| k[i] * orthonormal_legendre(i, x)).sum();
                (p.rate(x).unwrap() - approx).powi(2)
            })
            .sqrt()
        };
        let errs: Vec<f64> = [1, 3, 5, 7, 9].iter().map(|&o| err(o)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn galerkin_matches_exact_for_constant_rate() {
        use crate::refine::{adapt_dynamic, RefinementConfig};
        let p = OdeParams {
            sigma: 0.0,
            ..Default::default()
        };
        let sys = ode_galerkin_system(3, 1).unwrap();
        let cfg = RefinementConfig {
            order: 3,
            reduced_order: 1,
            ..Default::default()
        };
        let out = adapt_dynamic(&sys, &ode_initial(p), &cfg, 1.0, 0.01, 8).unwrap();
        assert_eq!(out.decomposition.len(), 1);
        assert_abs_diff_eq!(out.states[0].var(0)[0], 2f64.exp(), epsilon = 1e-7);
    }
}
