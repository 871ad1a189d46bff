//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the solver: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which never happens for finite literals and `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default dimensionless Newton tolerance: `1e-12` for `f64`, scaled up for
    /// lower precision types.
    #[inline]
    fn default_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(1e3))
    }
}

impl Real for f32 {}
impl Real for f64 {}
