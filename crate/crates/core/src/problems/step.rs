//! Piecewise-constant limit state with a jump at the origin.

use crate::randomspace::{split_element, Decomposition, Element};
use crate::surrogate::{GpcExpansion, MultiElementSurrogate};

/// `-1` on `[-1, 0)`, `-1/2` at `0`, `0` on `(0, 1]`.
pub fn step_g(z: f64) -> f64 {
    if z < 0.0 {
        -1.0
    } else if z == 0.0 {
        -0.5
    } else {
        0.0
    }
}

/// Legendre series of the step truncated after `P_{2p+1}` (order `2p + 1`).
///
/// In the unnormalized basis the coefficient of `P_{2n+1}` is
/// `(-1)^n (4n+3) (2n)! / (2^{2n+2} (n+1)! n!)`; the stored coefficient divides
/// by `sqrt(4n+3)`, the norm of `P_{2n+1}` under the uniform density.
pub fn step_global_gpc(p: usize) -> GpcExpansion<f64> {
    let order = 2 * p + 1;
    let mut coeffs = vec![0.0; order + 1];
    coeffs[0] = -0.5;
    // r = C(2n, n) / 4^n, updated by its ratio to avoid factorial overflow.
    let mut r = 1.0;
    for n in 0..=p {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let a = sign * (4.0 * nf + 3.0) / 4.0 * r / (nf + 1.0);
        coeffs[2 * n + 1] = a / (4.0 * nf + 3.0).sqrt();
        r *= (2.0 * nf + 1.0) / (2.0 * nf + 2.0);
    }
    GpcExpansion::new(Element::unit(1), order, coeffs).expect("coefficient count matches order")
}

/// Exact piecewise surrogate: `-1` on `[-1, 0)` and `0` on `[0, 1]`.
pub fn step_me_surrogate() -> MultiElementSurrogate<f64> {
    let kids = split_element(&Element::unit(1), &[0]).expect("unit element splits");
    let exps = vec![
        GpcExpansion::constant(kids[0].clone(), -1.0),
        GpcExpansion::constant(kids[1].clone(), 0.0),
    ];
    MultiElementSurrogate::new(Decomposition::new(kids).expect("halves partition the domain"), exps)
        .expect("one expansion per element")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::legendre;
    use crate::surrogate::{eval_expansion, lp_error, CountedModel, Surrogate};
    use approx::assert_abs_diff_eq;

    #[test]
    fn pointwise_values() {
        assert_eq!(step_g(-0.5), -1.0);
        assert_eq!(step_g(0.0), -0.5);
        assert_eq!(step_g(0.5), 0.0);
        assert_eq!(step_g(-1.0), -1.0);
        assert_eq!(step_g(1.0), 0.0);
    }

    #[test]
    fn lowest_order_surrogate() {
        let g = step_global_gpc(0);
        assert_eq!(g.order(), 1);
        for z in [-0.9, -0.2, 0.4, 1.0] {
            assert_abs_diff_eq!(eval_expansion(&g, &[z]).unwrap(), -0.5 + 0.75 * z, epsilon = 1e-15);
        }
    }

    #[test]
    fn matches_unnormalized_series() {
        // (2n)! / ((n+1)! n!) computed with exact integers for small n.
        let fact = |k: u64| (1..=k).product::<u64>() as f64;
        let g = step_global_gpc(7);
        for z in [-0.77, -0.1, 0.33, 0.9] {
            let mut v = -0.5;
            for n in 0..=7u64 {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let a = sign * (4 * n + 3) as f64 * fact(2 * n) / (2f64.powi(2 * n as i32 + 2) * fact(n + 1) * fact(n));
                v += a * legendre(2 * n as usize + 1, z);
            }
            assert_abs_diff_eq!(eval_expansion(&g, &[z]).unwrap(), v, epsilon = 1e-13);
        }
    }

    #[test]
    fn coefficients_are_projections() {
        // <g, phi_{2n+1}> = 1/2 * int_0^1 ... of -1 on [-1,0): equals -1/2 int_{-1}^0 phi.
        let rule = crate::polybasis::gauss_legendre::<f64>(40).unwrap();
        let g = step_global_gpc(3);
        for (k, &c) in g.coeffs().iter().enumerate() {
            // integrate over [-1, 0] via the mapped rule: z = (x - 1) / 2
            let v = -0.5 * rule.integrate(|x| crate::polybasis::orthonormal_legendre(k, (x - 1.0) / 2.0));
            assert_abs_diff_eq!(c, v, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_piecewise_surrogate_has_no_error() {
        let s = step_me_surrogate();
        assert_eq!(s.eval(&[-0.25]).unwrap(), -1.0);
        assert_eq!(s.eval(&[0.25]).unwrap(), 0.0);
        let m = CountedModel::new(1, |z: &[f64]| Ok(step_g(z[0])));
        for p in [1.0, 2.0, 4.0] {
            assert_eq!(lp_error(&s, &m, p, 10_000, 3).unwrap(), 0.0);
        }
    }
}
