//! Scalar abstraction for the numeric core.
//!
//! Every layer, score, and gradient in this crate is generic over a
//! floating-point scalar so the same code runs in `f32` or `f64`.
//! Training and persistence default to `f64` (see the aliases at the
//! crate root); `f32` is available for memory-constrained inference.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable in embeddings, layers, and dynamic programs.
pub trait Scalar:
    Float
    + NumAssignOps
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for constants and persisted values.
    fn from_f64(value: f64) -> Self;

    /// Widening (or identity) conversion to `f64`.
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(value: f64) -> Self {
        value as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }

    fn as_f64(self) -> f64 {
        self
    }
}
