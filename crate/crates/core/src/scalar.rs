//! Scalar abstraction: all signal synthesis and network math is generic over
//! the floating-point type. f64 is used where finite-difference verification
//! needs the headroom, f32 everywhere throughput matters.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + rustfft::FftNum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Lossy f64 -> T conversion; panics only for types that cannot represent
/// ordinary finite doubles, which f32/f64 always can.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 value representable in scalar type")
}

/// T -> f64 for metrics and serialization.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}
