//! Scalar abstraction shared by all numeric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the mechanisms are evaluated in.
///
/// The two tolerances scale the fixed absolute slacks used throughout the
/// crate: `FEASIBILITY_TOL` absorbs interpolation drift on the simplex and
/// unit-supply constraints, `IDENTITY_TOL` bounds disagreement between two
/// algebraically equal payment formulas.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    const FEASIBILITY_TOL: f64;
    const IDENTITY_TOL: f64;

    /// Converts an `f64` constant. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn feasibility_tol() -> Self {
        Self::lit(Self::FEASIBILITY_TOL)
    }

    fn identity_tol() -> Self {
        Self::lit(Self::IDENTITY_TOL)
    }
}

impl Scalar for f64 {
    const FEASIBILITY_TOL: f64 = 1e-12;
    const IDENTITY_TOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const FEASIBILITY_TOL: f64 = 1e-6;
    const IDENTITY_TOL: f64 = 1e-4;
}

/// Dot product over the common prefix of two slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `lambda * a + (1 - lambda) * b`, returning `a` exactly when the two
/// entries agree so that identical options stay bit-identical.
#[inline]
pub fn lerp<T: Scalar>(a: T, b: T, lambda: T) -> T {
    if a == b || lambda == T::one() {
        a
    } else if lambda == T::zero() {
        b
    } else {
        lambda * a + (T::one() - lambda) * b
    }
}
