//! Scalar abstraction for the numerical kernels.

use core::fmt::{Debug, Display, LowerExp};
use core::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real scalar usable as a matrix entry: `f32` or `f64`.
///
/// Algorithmic tolerances throughout the crate are stated as `f64` literals
/// and converted with [`real`]; they were chosen for `f64`, so `f32`
/// instantiations should pass explicit, looser tolerances where an operation
/// accepts one.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + LowerExp + Sum + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must convert into the scalar type")
}
