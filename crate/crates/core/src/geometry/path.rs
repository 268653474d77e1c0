//! Piecewise-linear paths, their action and the discrete slicing cost.

use serde::{Deserialize, Serialize};

use super::cost::{cost, lagrangian};
use super::geodesic::lerp;
use super::point::{HalfSpacePoint, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::{Extended, Real};

/// Piecewise-linear curve in the closed half-space, `t₀ = 0 < … < t_N = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path<T> {
    times: Vec<T>,
    knots: Vec<HalfSpacePoint<T>>,
}

impl<T: Real> Path<T> {
    pub fn new(times: Vec<T>, knots: Vec<HalfSpacePoint<T>>) -> Result<Self> {
        check_partition(&times)?;
        if times.len() != knots.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} knots",
                times.len(),
                knots.len()
            )));
        }
        let dim = knots[0].dim();
        for knot in &knots {
            if knot.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: knot.dim(),
                });
            }
            if !(knot.x1 >= T::zero()) {
                return Err(Error::InvalidPath(
                    "knot outside the closed half-space".into(),
                ));
            }
        }
        Ok(Path { times, knots })
    }

    /// Straight chord from `x` to `y` over `[0, 1]`.
    pub fn chord(x: HalfSpacePoint<T>, y: HalfSpacePoint<T>) -> Result<Self> {
        Self::new(vec![T::zero(), T::one()], vec![x, y])
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn knots(&self) -> &[HalfSpacePoint<T>] {
        &self.knots
    }

    /// Linear interpolation at `t`, clamped to `[0, 1]`.
    pub fn point_at(&self, t: T) -> HalfSpacePoint<T> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.knots[0].clone();
        }
        if t >= self.times[last] {
            return self.knots[last].clone();
        }
        // first index with times[k] > t
        let k = self.times.partition_point(|s| *s <= t);
        if self.times[k - 1] == t {
            return self.knots[k - 1].clone();
        }
        let s = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1]);
        lerp(&self.knots[k - 1], &self.knots[k], s)
    }
}

/// Checks that `times` starts at 0, ends at 1 and increases strictly.
pub fn check_partition<T: Real>(times: &[T]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidPath("need at least two times".into()));
    }
    if times[0] != T::zero() || times[times.len() - 1] != T::one() {
        return Err(Error::InvalidPath(
            "times must start at 0 and end at 1".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPath("times must increase strictly".into()));
    }
    Ok(())
}

/// Path action `∫₀¹ L̄(ω_t, ω̇_t) dt`.
///
/// A segment with both knots on the boundary uses the boundary Lagrangian,
/// every other segment the interior one. A piecewise-linear path leaves the
/// boundary only through such interior segments, so the `+∞` branch of `L̄`
/// is never reached and the result is finite in practice.
pub fn action<T: Real>(params: &ModelParams<T>, path: &Path<T>) -> Result<Extended<T>> {
    params.check_dim(path.knots[0].dim())?;
    let mut total = Extended::Finite(T::zero());
    for k in 0..path.knots.len() - 1 {
        let (x, y) = (&path.knots[k], &path.knots[k + 1]);
        let dt = path.times[k + 1] - path.times[k];
        let q: Vec<T> = y
            .coords()
            .iter()
            .zip(x.coords())
            .map(|(b, a)| (*b - a) / dt)
            .collect();
        let location = if x.on_boundary() && y.on_boundary() {
            x.clone()
        } else {
            // any interior point stands in for the open segment
            HalfSpacePoint {
                x1: T::one(),
                xp: x.xp.clone(),
            }
        };
        total = match lagrangian(params, &location, &q)? {
            Extended::Finite(v) => total + Extended::Finite(v * dt),
            Extended::Infinite => Extended::Infinite,
        };
    }
    Ok(total)
}

/// Discrete cost `Σ_j c(y_j, y_{j+1}) / (t_{j+1} - t_j)` of a waypoint chain.
///
/// `times[0]` must be the time of `points[0]`; the times need only increase.
pub fn discrete_cost<T: Real>(
    params: &ModelParams<T>,
    times: &[T],
    points: &[HalfSpacePoint<T>],
) -> Result<T> {
    if times.len() != points.len() || times.len() < 2 {
        return Err(Error::InvalidPath(
            "need matching times and points, at least two".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPath("times must increase strictly".into()));
    }
    let mut total = T::zero();
    for j in 0..points.len() - 1 {
        total = total + cost(params, &points[j], &points[j + 1]) / (times[j + 1] - times[j]);
    }
    Ok(total)
}

/// Sliced cost `C^N` of `path` along `partition`.
pub fn sliced_cost<T: Real>(params: &ModelParams<T>, path: &Path<T>, partition: &[T]) -> Result<T> {
    check_partition(partition)?;
    params.check_dim(path.knots[0].dim())?;
    let points: Vec<_> = partition.iter().map(|t| path.point_at(*t)).collect();
    discrete_cost(params, partition, &points)
}
