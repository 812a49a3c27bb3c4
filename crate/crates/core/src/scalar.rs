//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the polynomial, mesh and Galerkin machinery is generic over.
///
/// Implemented for `f32` and `f64`. Reference problems and the CLI use `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count or index.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Convergence tolerance for Newton-type iterations in this precision.
    fn newton_tol() -> Self;
}

impl Scalar for f64 {
    fn newton_tol() -> Self {
        1e-15
    }
}

impl Scalar for f32 {
    fn newton_tol() -> Self {
        4.0 * f32::EPSILON
    }
}
