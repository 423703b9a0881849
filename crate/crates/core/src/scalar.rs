use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point element type used by feature matrices, weights and the
/// functional datapaths: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Size of one stored element in bytes.
    const BYTES: usize;

    /// Converts an `f64` literal or parameter into this type.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("float converts to f64")
    }

    /// Converts between scalar types.
    fn cast<U: Scalar>(self) -> U {
        U::lit(self.as_f64())
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;
}

impl Scalar for f64 {
    const BYTES: usize = 8;
}
