use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type used throughout the model.
///
/// Implemented for `f64` (default, required for gradient checks) and `f32`.
pub trait Real: Float + Default + Debug + Display + Sum + Send + Sync + 'static {
    /// Bit width reported in archives and on the command line.
    const BITS: u32;

    fn from_f64(value: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    const BITS: u32 = 64;

    #[inline]
    fn from_f64(value: f64) -> Self {
        value
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const BITS: u32 = 32;

    #[inline]
    fn from_f64(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}
