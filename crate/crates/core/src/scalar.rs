//! Scalar abstraction for the numeric kernels.
//!
//! The network engine and the symlog transforms are written once against
//! [`Scalar`] and instantiated for `f32` and `f64`. The simulator and the
//! learners run on `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the network engine: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; finite inputs always convert.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
