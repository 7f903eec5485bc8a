//! Scalar abstraction shared by the analytical model.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the closed-form model is evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Largest argument `x` for which `exp(x)` is finite.
    #[inline]
    fn max_exp_arg() -> Self {
        Self::max_value().ln()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
