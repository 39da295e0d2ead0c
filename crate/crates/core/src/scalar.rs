//! Storage scalar abstraction.
//!
//! Probability maps, logits and gradients can be held in `f32` or `f64`.
//! Every reduction widens to `f64` first, so results only depend on the
//! storage precision through the rounding of the stored values.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Round an `f64` into storage precision.
    fn narrow(v: f64) -> Self;
    /// Exact widening to `f64`.
    fn widen(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn narrow(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn narrow(v: f64) -> Self {
        v
    }
    #[inline]
    fn widen(self) -> f64 {
        self
    }
}
