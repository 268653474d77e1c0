//! Scalar abstraction for the closed-form geometry.
//!
//! Everything in [`crate::geometry`] is written against [`Real`], so the cost,
//! the geodesics and the path actions can be evaluated in `f32` or `f64`.
//! The kernel, simulator and transport layers are numerically demanding and
//! work in `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the geometry layer: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Extended nonnegative real: a finite value or `+∞`.
///
/// The relaxed Lagrangian genuinely takes the value `+∞` (normal velocity on
/// the boundary when `a > 1`), which must not be confused with a large float.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// Map to a float, sending the sentinel to `T::infinity()`.
    pub fn to_float(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }
}

impl<T: Real> std::ops::Add for Extended<T> {
    type Output = Extended<T>;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl<T: Real> Display for Extended<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}
