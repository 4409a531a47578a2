//! Scalar abstraction for the numeric core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the core math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lift an `f64` constant into the scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// NaN-free minimum; NaN operands lose.
#[inline]
pub fn fmin<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// NaN-free maximum; NaN operands lose.
#[inline]
pub fn fmax<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}
