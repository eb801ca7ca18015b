//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FloatConst, ToPrimitive};

/// Real scalar the simulation kernels are generic over.
///
/// Implemented for `f32` and `f64`. Every tolerance in the crate is expressed
/// through [`Real::tol`] so that single precision stays usable for the
/// kernels while the acceptance thresholds are pinned for `f64`.
pub trait Real: RealField + FloatConst + ToPrimitive + Copy + Debug + Display {
    /// Default absolute tolerance for structural checks (Hermiticity,
    /// normalization, unitarity).
    fn tol() -> Self;

    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn tol() -> Self {
        1e-4
    }
}
