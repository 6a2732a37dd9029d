//! Scalar abstraction for the numeric core.
//!
//! Everything in this crate is generic over a real scalar type `R`; the
//! concrete instantiations used in practice are `f64` (all quantitative
//! work) and `f32` (smoke coverage of the generic path). Tolerances are
//! expressed as multiples of the machine epsilon so that the documented
//! `f64` figures scale sensibly to other widths.

use std::fmt;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar for all numeric work: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }

    /// Lossy view as `f64`, used at serialization boundaries.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + fmt::Debug
        + fmt::Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Hermiticity tolerance; 1e-12 at f64 width.
pub fn herm_tol<R: Real>() -> R {
    R::epsilon() * R::of(4.5e3)
}

/// Unitarity / normalization tolerance; 1e-10 at f64 width.
pub fn unitary_tol<R: Real>() -> R {
    R::epsilon() * R::of(4.5e5)
}

/// `n` evenly spaced points covering `[a, b]` inclusive.
pub fn linspace<R: Real>(a: R, b: R, n: usize) -> Vec<R> {
    assert!(n >= 1, "linspace needs at least one point");
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / R::of((n - 1) as f64);
    (0..n).map(|k| a + step * R::of(k as f64)).collect()
}
