//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// All linear algebra goes through nalgebra's `RealField`; conversions to and
/// from `f64` go through num-traits. Random draws and file I/O stay in `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }

    #[inline]
    fn finite(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
