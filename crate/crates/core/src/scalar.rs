use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerical routines are generic over.
///
/// Implemented for `f32` and `f64`. Random variates, quantiles of the normal
/// law and configuration constants are produced in `f64` and converted with
/// [`Scalar::lit`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Default KKT tolerance for the coordinate-descent solver at this precision.
    const DEFAULT_KKT_TOL: f64;
    /// Default per-sweep coefficient change for early exit of inner sweeps.
    const DEFAULT_COORD_TOL: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f64 {
    const DEFAULT_KKT_TOL: f64 = 1e-8;
    const DEFAULT_COORD_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const DEFAULT_KKT_TOL: f64 = 1e-4;
    const DEFAULT_COORD_TOL: f64 = 1e-6;
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Soft-thresholding operator `sgn(x) * max(|x| - t, 0)`; ties at the kink give exactly zero.
#[inline]
pub fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}
