//! Inverse error function and normal distribution helpers.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-13;

/// Closed-form approximation of `erfinv` accurate to about single precision.
fn erfinv_guess(x: f64) -> f64 {
    let mut w = -((1.0 - x) * (1.0 + x)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.810_226_36e-08,
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(0.0, |p, &c| p * w + c)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000_200_214_257,
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(0.0, |p, &c| p * w + c)
    };
    p * x
}

/// Inverse error function on `(-1, 1)`.
///
/// Newton iterations refine the initial guess until `|erf(y) - x| < 1e-13`.
/// For `|x| > 0.5` the residual is formed with `erfc` against the exact
/// `1 - |x|`, which keeps the tail accurate.
pub fn erfinv(x: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::domain(format!("erfinv argument {x} outside (-1, 1)")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let a = x.abs();
    let tail = a > 0.5;
    let one_minus = 1.0 - a;
    let residual = |y: f64| {
        if tail {
            one_minus - libm::erfc(y)
        } else {
            libm::erf(y) - a
        }
    };
    let mut y = erfinv_guess(a);
    for _ in 0..100 {
        let slope = FRAC_2_SQRT_PI * (-y * y).exp();
        let step = residual(y) / slope;
        y -= step;
        if step.abs() <= 1e-16 * y.abs().max(1.0) {
            break;
        }
    }
    if !(residual(y).abs() < RESIDUAL_TOL) {
        return Err(Error::domain(format!("erfinv did not converge at {x}")));
    }
    Ok(y.copysign(x))
}

/// `mu + sqrt(2) sigma erfinv(x)`: maps a uniform variable on `(-1, 1)` to a normal one.
pub fn gaussian_from_uniform(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    Ok(mu + SQRT_2 * sigma * erfinv(x)?)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Phi(x)`, accurate for large `x`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomspace::sample_uniform;
    use approx::assert_abs_diff_eq;

    #[test]
    fn round_trip_on_grid() {
        for i in 1..20_000 {
            let x = -1.0 + i as f64 / 10_000.0;
            let y = erfinv(x).unwrap();
            assert!((libm::erf(y) - x).abs() < 1e-13, "{x}");
        }
        for k in 1..52 {
            let x = 1.0 - 2f64.powi(-k);
            let y = erfinv(x).unwrap();
            assert!((libm::erfc(y) - (1.0 - x)).abs() <= 1e-13 * (1.0 - x) + 1e-300, "{x}");
            assert_eq!(erfinv(-x).unwrap(), -y);
        }
    }

    #[test]
    fn known_values() {
        assert_eq!(erfinv(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(erfinv(0.5).unwrap(), 0.476_936_276_204_469_9, epsilon = 1e-14);
        assert_abs_diff_eq!(erfinv(libm::erf(1.0 / SQRT_2)).unwrap() * SQRT_2, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_tail(1.959_963_984_540_054), 0.025, epsilon = 1e-15);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(gaussian_from_uniform(0.0, -2.0, 1.0).unwrap(), -2.0);
        assert_abs_diff_eq!(
            gaussian_from_uniform(libm::erf(1.0 / SQRT_2), 0.0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(gaussian_from_uniform(1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(gaussian_from_uniform(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn transformed_sample_mean() {
        let s = sample_uniform::<f64>(1_000_000, 1, 2024).unwrap();
        let mean: f64 = s
            .iter()
            .map(|x| gaussian_from_uniform(x[0], -2.0, 1.0).unwrap())
            .sum::<f64>()
            / 1e6;
        assert!((mean + 2.0).abs() < 0.003, "{mean}");
    }
}
