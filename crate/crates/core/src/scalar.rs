//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    /// Converts an integer count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    /// `max(floor, factor * epsilon)`: a tolerance that never drops below a
    /// few ulps of the scalar type.
    #[inline]
    fn tol(floor: f64, factor: f64) -> Self {
        Self::lit(floor).max(Self::epsilon() * Self::lit(factor))
    }
}

impl Real for f32 {}
impl Real for f64 {}
