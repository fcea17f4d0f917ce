//! Scalar abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point element type: `f64` for training, `f32` where memory matters.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or parameter.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to any Float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
