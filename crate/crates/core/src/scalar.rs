//! Scalar abstraction: every numerical routine in this crate is generic over
//! [`Real`], which `f32` and `f64` satisfy.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the toolkit.
pub trait Real:
    Float + NumAssign + FromPrimitive + Sum + Send + Sync + Debug + Display + 'static
{
    /// Lossy conversion for diagnostics (error messages, reports).
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + NumAssign + FromPrimitive + Sum + Send + Sync + Debug + Display + 'static
{
}
