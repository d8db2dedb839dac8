//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All physics is written against [`Real`] so the same code runs in `f64`
//! (the working precision for design studies) and `f32` (quick sweeps,
//! embedded targets). Tolerances quoted in the docs refer to `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Vacuum permittivity in F/m.
    fn epsilon0() -> Self {
        lit(8.8541878128e-12)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("float conversion")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize conversion")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
