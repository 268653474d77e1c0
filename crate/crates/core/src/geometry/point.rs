use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical model: tangential diffusivity `a`, stickiness `theta`, ambient
/// dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub a: T,
    pub theta: T,
    pub d: usize,
}

impl<T: Real> ModelParams<T> {
    pub fn new(a: T, theta: T, d: usize) -> Result<Self> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::param(format!(
                "diffusivity a must be positive, got {a}"
            )));
        }
        if !(theta > T::zero()) || !theta.is_finite() {
            return Err(Error::param(format!(
                "stickiness theta must be positive, got {theta}"
            )));
        }
        if d < 2 {
            return Err(Error::param(format!(
                "dimension must be at least 2, got {d}"
            )));
        }
        Ok(Self { a, theta, d })
    }

    /// `A = a - 1`, the excess boundary diffusivity.
    pub fn excess(&self) -> T {
        self.a - T::one()
    }

    /// Contact angle with the normal, `sin²α = 1/a`; only defined for `a ≥ 1`.
    pub fn contact_angle(&self) -> Result<T> {
        if self.a < T::one() {
            return Err(Error::param("contact angle requires a >= 1"));
        }
        Ok((T::one() / self.a.sqrt()).asin())
    }

    /// True in the sticky regime where the boundary is faster than the interior.
    pub fn is_sticky_regime(&self) -> bool {
        self.a > T::one()
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: len,
            });
        }
        Ok(())
    }
}

/// Point `(x1, x')` of the closed half-space, `x1 ≥ 0` the normal coordinate.
///
/// Boundary membership is exact: a point is on the boundary iff `x1 == 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePoint<T> {
    pub x1: T,
    pub xp: Vec<T>,
}

impl<T: Real> HalfSpacePoint<T> {
    pub fn new(x1: T, xp: Vec<T>) -> Result<Self> {
        if !(x1 >= T::zero()) || !x1.is_finite() {
            return Err(Error::param(format!(
                "normal coordinate must be >= 0, got {x1}"
            )));
        }
        if xp.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("tangential coordinates must be finite"));
        }
        if xp.is_empty() {
            return Err(Error::param("at least one tangential coordinate required"));
        }
        Ok(Self { x1, xp })
    }

    /// Planar point `(x1, x2)`.
    pub fn planar(x1: T, x2: T) -> Result<Self> {
        Self::new(x1, vec![x2])
    }

    /// Boundary point with the given tangential coordinates.
    pub fn boundary(xp: Vec<T>) -> Result<Self> {
        Self::new(T::zero(), xp)
    }

    /// Build from full coordinates, normal coordinate first.
    pub fn from_coords(coords: &[T]) -> Result<Self> {
        match coords.split_first() {
            Some((x1, rest)) => Self::new(*x1, rest.to_vec()),
            None => Err(Error::param("empty coordinate list")),
        }
    }

    pub fn on_boundary(&self) -> bool {
        self.x1 == T::zero()
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.xp.len() + 1
    }

    pub fn coords(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim());
        out.push(self.x1);
        out.extend_from_slice(&self.xp);
        out
    }

    /// `|y' - x'|`.
    pub fn tangential_distance(&self, other: &Self) -> T {
        assert_eq!(
            self.xp.len(),
            other.xp.len(),
            "points of different dimension"
        );
        self.xp
            .iter()
            .zip(&other.xp)
            .fold(T::zero(), |acc, (a, b)| acc + (*b - *a) * (*b - *a))
            .sqrt()
    }

    /// Squared Euclidean distance.
    pub fn distance_sq(&self, other: &Self) -> T {
        let t = self.tangential_distance(other);
        let n = self.x1 - other.x1;
        n * n + t * t
    }
}

pub(crate) fn norm_sq<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + *x * *x)
}
