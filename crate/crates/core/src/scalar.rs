//! Floating point scalar abstraction shared by the continuous-valued code paths.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the time series, continuous LIF dynamics and readout.
///
/// Implemented for `f32` and `f64`. `nalgebra::RealField` is required so the
/// readout can run its SVD on the same type.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + nalgebra::RealField
    + Copy
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or config value.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
