use crate::scalar::Scalar;

/// Unnormalized Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre<T: Scalar>(n: usize, x: T) -> T {
    legendre_with_derivative(n, x).0
}

/// `P_n(x)` and `P_n'(x)`.
pub(crate) fn legendre_with_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut prev = T::one();
    let mut cur = x;
    for k in 1..n {
        let kf = T::of_usize(k);
        let next = ((kf + kf + T::one()) * x * cur - kf * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    let nf = T::of_usize(n);
    let one_minus = T::one() - x * x;
    let deriv = if one_minus == T::zero() {
        // P_n'(±1) = (±1)^{n-1} n(n+1)/2
        let d = nf * (nf + T::one()) / T::of(2.0);
        if x < T::zero() && n.is_multiple_of(2) {
            -d
        } else {
            d
        }
    } else {
        nf * (prev - x * cur) / one_minus
    };
    (cur, deriv)
}

/// `sqrt(2n+1) P_n(x)`: orthonormal against the uniform density 1/2 on [-1, 1].
pub fn orthonormal_legendre<T: Scalar>(n: usize, x: T) -> T {
    (T::of_usize(2 * n + 1)).sqrt() * legendre(n, x)
}

/// Fills `out[k] = orthonormal_legendre(k, x)` for `k = 0..out.len()`.
pub fn orthonormal_legendre_all<T: Scalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let mut prev = T::one();
    let mut cur = x;
    out[0] = T::one();
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        if n > 1 {
            let kf = T::of_usize(n - 1);
            let next = ((kf + kf + T::one()) * x * cur - kf * prev) / (kf + T::one());
            prev = cur;
            cur = next;
        }
        *slot = T::of_usize(2 * n + 1).sqrt() * cur;
    }
}
