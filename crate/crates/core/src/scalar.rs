//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`, rounding to the nearest value.
    fn lit(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 literal representable")
    }

    /// Widens `self` to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.7), 0.7);
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert_eq!(0.25f32.as_f64(), 0.25);
    }
}
