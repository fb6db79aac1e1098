//! Scalar abstraction for the numeric kernels.
//!
//! Everything that is plain real arithmetic (step functions, quadrature,
//! Brownian functionals, Euler stepping, tabulated laws) is generic over
//! [`Real`] so it can run at `f32` or `f64`. The statistical layer (random
//! streams, hypotheses, tests, harness) works at `f64`; see the type
//! aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`, rounded for `f32`.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Lossless widening to `f64`.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real widens to f64")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_f64_lossy(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
