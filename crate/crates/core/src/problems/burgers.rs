//! Position of the transition layer of viscous Burgers under a boundary
//! perturbation, from the algebraic equations
//! `A tanh(A (1 + z) / (2 nu)) = 1 + delta`, `A tanh(A (1 - z) / (2 nu)) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;
const MAX_DZ: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersParams {
    /// `delta` is uniform on `[0, e]`.
    pub e: f64,
    pub nu: f64,
    /// Failure when the layer moves beyond `z0`.
    pub z0: f64,
}

impl Default for BurgersParams {
    fn default() -> Self {
        Self {
            e: 0.1,
            nu: 0.05,
            z0: 0.75,
        }
    }
}

/// Residuals of the two layer equations.
pub fn burgers_residual(a: f64, z: f64, delta: f64, nu: f64) -> [f64; 2] {
    [
        a * (a * (1.0 + z) / (2.0 * nu)).tanh() - (1.0 + delta),
        a * (a * (1.0 - z) / (2.0 * nu)).tanh() - 1.0,
    ]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Solves for `(A, z)` by damped Newton from `(1, 0)`.
///
/// The `z` step is capped and a backtracking line search accepts any step
/// that does not increase the residual: for small `nu` the residual is nearly
/// flat in `z` until the iterate approaches the layer.
pub fn burgers_transition(delta: f64, nu: f64) -> Result<(f64, f64)> {
    if !(delta >= 0.0) || !(nu > 0.0) {
        return Err(Error::invalid(format!("need delta >= 0 and nu > 0, got {delta}, {nu}")));
    }
    let (mut a, mut z) = (1.0f64, 0.0f64);
    let mut r = burgers_residual(a, z, delta, nu);
    for it in 0..MAX_ITER {
        if norm(r) < RESIDUAL_TOL {
            return Ok((a, z));
        }
        let s = 2.0 * nu;
        let (x1, x2) = (a * (1.0 + z) / s, a * (1.0 - z) / s);
        let (t1, t2) = (x1.tanh(), x2.tanh());
        let (c1, c2) = (sech2(x1), sech2(x2));
        let j11 = t1 + x1 * c1;
        let j12 = a * a / s * c1;
        let j21 = t2 + x2 * c2;
        let j22 = -a * a / s * c2;
        let det = j11 * j22 - j12 * j21;
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::RootFailure {
                iterations: it,
                a,
                z,
                residual: norm(r),
            });
        }
        let mut da = -(r[0] * j22 - r[1] * j12) / det;
        let mut dz = -(j11 * r[1] - j21 * r[0]) / det;
        if dz.abs() > MAX_DZ {
            let scale = MAX_DZ / dz.abs();
            da *= scale;
            dz *= scale;
        }
        let mut lambda = 1.0;
        loop {
            let (na, nz) = (a + lambda * da, z + lambda * dz);
            if na > 0.0 && nz.abs() < 1.0 {
                let nr = burgers_residual(na, nz, delta, nu);
                if norm(nr) <= norm(r) {
                    a = na;
                    z = nz;
                    r = nr;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::RootFailure {
                    iterations: it,
                    a,
                    z,
                    residual: norm(r),
                });
            }
        }
    }
    if norm(r) < RESIDUAL_TOL {
        return Ok((a, z));
    }
    Err(Error::RootFailure {
        iterations: MAX_ITER,
        a,
        z,
        residual: norm(r),
    })
}

/// Layer position `z(delta)`.
pub fn burgers_transition_z(delta: f64, nu: f64) -> Result<f64> {
    burgers_transition(delta, nu).map(|(_, z)| z)
}

/// `z0 - z(delta)` with `delta = e (x + 1) / 2`.
pub fn burgers_limit_state(x: f64, params: &BurgersParams) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::domain(format!("x = {x} outside [-1, 1]")));
    }
    let delta = params.e * (x + 1.0) / 2.0;
    Ok(params.z0 - burgers_transition_z(delta, params.nu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_chacha::rand_core::{RngCore, SeedableRng};

    #[test]
    fn unperturbed_layer_is_centred() {
        for nu in [0.02, 0.05, 0.1] {
            assert_eq!(burgers_transition_z(0.0, nu).unwrap(), 0.0);
        }
        assert_eq!(burgers_limit_state(-1.0, &BurgersParams::default()).unwrap(), 0.75);
    }

    #[test]
    fn residual_on_random_parameters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..1000 {
            let delta = 0.1 * unit();
            let nu = 0.02 + 0.08 * unit();
            let (a, z) = burgers_transition(delta, nu).unwrap();
            assert!(norm(burgers_residual(a, z, delta, nu)) < 1e-12, "delta {delta} nu {nu}");
        }
    }

    #[test]
    fn reference_values() {
        // Independent bracketing solutions at nu = 0.05.
        for (delta, z) in [
            (1e-4, 0.5049),
            (1e-3, 0.6203),
            (0.01, 0.7375),
            (0.05, 0.8232),
            (0.1, 0.8616),
        ] {
            assert_abs_diff_eq!(burgers_transition_z(delta, 0.05).unwrap(), z, epsilon = 1e-4);
        }
    }

    #[test]
    fn layer_moves_monotonically() {
        let zs: Vec<f64> = (0..=1000)
            .map(|i| burgers_transition_z(i as f64 * 1e-4, 0.05).unwrap())
            .collect();
        assert!(zs.windows(2).all(|w| w[1] > w[0]));
        // Away from delta = 0 neighbouring grid values stay close.
        assert!(zs[1..].windows(2).all(|w| w[1] - w[0] < 0.2));
    }

    #[test]
    fn layer_jumps_off_centre_immediately() {
        // The layer is supersensitive: already delta = 1e-4 moves it halfway
        // to the boundary, so the first grid step is a large jump.
        let z = burgers_transition_z(1e-4, 0.05).unwrap();
        assert!(z > 0.5);
        assert!(burgers_transition_z(1e-12, 0.05).unwrap() < 1e-4);
    }

    #[test]
    fn invalid_inputs() {
        assert!(burgers_transition(-1.0, 0.05).is_err());
        assert!(burgers_transition(0.1, 0.0).is_err());
        assert!(matches!(
            burgers_limit_state(1.5, &BurgersParams::default()),
            Err(Error::Domain(_))
        ));
    }
}
