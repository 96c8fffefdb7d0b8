//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The engine is written against [`Scalar`] rather than a concrete float so
//! the same graph code runs in `f32` for speed experiments and `f64` for the
//! gradient checks. Only IEEE binary floats qualify: softmax, `exp` and
//! square roots rule out exact rational arithmetic.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Short tag written into checkpoint manifests.
    const NAME: &'static str;

    /// Converts an `f64` literal. Every finite `f64` maps to some value of
    /// the target type, so this never fails for the types we implement.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
