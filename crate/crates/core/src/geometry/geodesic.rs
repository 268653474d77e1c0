//! Explicit minimizers of the path action.
//!
//! Outside the cone (and for `a > 1`) the geodesic enters the boundary at
//! angle `α` to the normal, `sin²α = 1/a`, slides along the boundary and
//! leaves at the same angle. With `u` the unit vector along `y' - x'` the
//! contact points are
//!
//! ```text
//! z_in  = (0, x' + (x₁/√A) u)
//! z_out = (0, y' - (y₁/√A) u)
//! ```
//!
//! and the segment durations are chosen so that `L̄(ω, ω̇)` is constant.

use serde::{Deserialize, Serialize};

use super::cost::{cone_contains, cost};
use super::path::Path;
use super::point::{HalfSpacePoint, ModelParams};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicCase {
    Euclidean,
    BoundaryOnly,
    /// Starts on the boundary, slides, then leaves into the interior.
    OneTouchExit,
    /// Starts inside, enters the boundary and ends there.
    OneTouchEntry,
    ThreeSegment,
}

impl GeodesicCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeodesicCase::Euclidean => "euclidean",
            GeodesicCase::BoundaryOnly => "boundary_only",
            GeodesicCase::OneTouchExit => "one_touch_exit",
            GeodesicCase::OneTouchEntry => "one_touch_entry",
            GeodesicCase::ThreeSegment => "three_segment",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: HalfSpacePoint<T>,
    pub end: HalfSpacePoint<T>,
    pub duration: T,
}

impl<T: Real> Segment<T> {
    /// Lies entirely on the boundary.
    pub fn on_boundary(&self) -> bool {
        self.start.on_boundary() && self.end.on_boundary()
    }

    /// Unit direction, or `None` for a zero-length segment.
    pub fn direction(&self) -> Option<Vec<T>> {
        let delta: Vec<T> = self
            .end
            .coords()
            .iter()
            .zip(self.start.coords())
            .map(|(e, s)| *e - s)
            .collect();
        let len = delta.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
        if len == T::zero() {
            return None;
        }
        Some(delta.into_iter().map(|v| v / len).collect())
    }

    /// Point at local fraction `s ∈ [0, 1]`.
    pub fn point_at(&self, s: T) -> HalfSpacePoint<T> {
        if s <= T::zero() {
            return self.start.clone();
        }
        if s >= T::one() {
            return self.end.clone();
        }
        lerp(&self.start, &self.end, s)
    }
}

/// Linear interpolation that keeps boundary segments exactly on the boundary
/// and clamps rounding below zero.
pub(crate) fn lerp<T: Real>(
    a: &HalfSpacePoint<T>,
    b: &HalfSpacePoint<T>,
    s: T,
) -> HalfSpacePoint<T> {
    let x1 = if a.on_boundary() && b.on_boundary() {
        T::zero()
    } else {
        ((T::one() - s) * a.x1 + s * b.x1).max(T::zero())
    };
    let xp =
        a.xp.iter()
            .zip(&b.xp)
            .map(|(u, v)| (T::one() - s) * *u + s * *v)
            .collect();
    HalfSpacePoint { x1, xp }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicDescription<T> {
    pub case: GeodesicCase,
    pub segments: Vec<Segment<T>>,
    pub total_cost: T,
}

impl<T: Real> GeodesicDescription<T> {
    /// Cumulative times at the end of each segment.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.segments
            .iter()
            .map(|seg| {
                acc = acc + seg.duration;
                acc
            })
            .collect()
    }

    /// Position at time `t ∈ [0, 1]`, honouring the per-segment durations.
    ///
    /// Times within a few ulps of a breakpoint return that breakpoint exactly.
    pub fn point_at(&self, t: T) -> HalfSpacePoint<T> {
        let snap = T::lit(64.0) * T::epsilon();
        let mut start = T::zero();
        for (k, seg) in self.segments.iter().enumerate() {
            let end = start + seg.duration;
            if (t - start).abs() <= snap {
                return seg.start.clone();
            }
            if (t - end).abs() <= snap {
                return seg.end.clone();
            }
            if t < end || k + 1 == self.segments.len() {
                if seg.duration == T::zero() {
                    return seg.end.clone();
                }
                return seg.point_at((t - start) / seg.duration);
            }
            start = end;
        }
        unreachable!("geodesic without segments")
    }

    /// The geodesic as a piecewise-linear [`Path`] with knots at the breakpoints.
    pub fn to_path(&self) -> Path<T> {
        let mut times = vec![T::zero()];
        let mut knots = vec![self.segments[0].start.clone()];
        let mut acc = T::zero();
        for (k, seg) in self.segments.iter().enumerate() {
            acc = acc + seg.duration;
            times.push(if k + 1 == self.segments.len() {
                T::one()
            } else {
                acc
            });
            knots.push(seg.end.clone());
        }
        Path::new(times, knots).expect("geodesic segments have positive durations")
    }
}

/// Explicit geodesic between `x` and `y`.
pub fn geodesic<T: Real>(
    params: &ModelParams<T>,
    x: &HalfSpacePoint<T>,
    y: &HalfSpacePoint<T>,
) -> GeodesicDescription<T> {
    let total_cost = cost(params, x, y);
    let straight = |case| GeodesicDescription {
        case,
        segments: vec![Segment {
            start: x.clone(),
            end: y.clone(),
            duration: T::one(),
        }],
        total_cost,
    };

    if !params.is_sticky_regime() || cone_contains(params, x, y).unwrap_or(true) {
        return straight(GeodesicCase::Euclidean);
    }
    if x.on_boundary() && y.on_boundary() {
        return straight(GeodesicCase::BoundaryOnly);
    }

    // Outside the cone, so y' != x'.
    let s = x.tangential_distance(y);
    let root_a = params.excess().sqrt();
    let u: Vec<T> = x.xp.iter().zip(&y.xp).map(|(a, b)| (*b - *a) / s).collect();
    let z_in = HalfSpacePoint {
        x1: T::zero(),
        xp: x
            .xp
            .iter()
            .zip(&u)
            .map(|(p, d)| *p + x.x1 / root_a * *d)
            .collect(),
    };
    let z_out = HalfSpacePoint {
        x1: T::zero(),
        xp: y
            .xp
            .iter()
            .zip(&u)
            .map(|(p, d)| *p - y.x1 / root_a * *d)
            .collect(),
    };

    // Constant Lagrangian: interior speed √(2λ), boundary speed √(2aλ).
    let slant = (params.a / params.excess()).sqrt();
    let len_in = x.x1 * slant;
    let len_out = y.x1 * slant;
    let len_boundary = z_in.tangential_distance(&z_out);
    let sqrt_a = params.a.sqrt();
    let weight = len_in + len_out + len_boundary / sqrt_a;

    let mut segments = Vec::with_capacity(3);
    if !x.on_boundary() {
        segments.push(Segment {
            start: x.clone(),
            end: z_in.clone(),
            duration: len_in / weight,
        });
    }
    segments.push(Segment {
        start: z_in,
        end: z_out.clone(),
        duration: len_boundary / sqrt_a / weight,
    });
    if !y.on_boundary() {
        segments.push(Segment {
            start: z_out,
            end: y.clone(),
            duration: len_out / weight,
        });
    }
    let case = match (x.on_boundary(), y.on_boundary()) {
        (false, false) => GeodesicCase::ThreeSegment,
        (true, false) => GeodesicCase::OneTouchExit,
        (false, true) => GeodesicCase::OneTouchEntry,
        (true, true) => unreachable!(),
    };
    GeodesicDescription {
        case,
        segments,
        total_cost,
    }
}
