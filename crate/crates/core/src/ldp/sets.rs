//! Target sets and constrained minimisation of the cost over them.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{cost, HalfSpacePoint, ModelParams};

type Params = ModelParams<f64>;
type Point = HalfSpacePoint<f64>;

/// A target set in the closed half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    /// Closed Euclidean ball intersected with `{y₁ ≥ 0}`.
    Ball { center: Point, radius: f64 },
    /// Closed `(d-1)`-ball on the boundary `{y₁ = 0}`.
    BoundaryPatch { center: Vec<f64>, radius: f64 },
}

impl TargetSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(param(format!("radius must be positive, got {radius}")));
        }
        Ok(TargetSet::Ball { center, radius })
    }

    pub fn boundary_patch(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(param(format!("radius must be positive, got {radius}")));
        }
        if center.is_empty() {
            return Err(param("patch centre needs tangential coordinates"));
        }
        Ok(TargetSet::BoundaryPatch { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Ball { center, .. } => center.dim(),
            TargetSet::BoundaryPatch { center, .. } => center.len() + 1,
        }
    }

    pub fn contains(&self, y: &Point) -> bool {
        match self {
            TargetSet::Ball { center, radius } => y.distance_sq(center) <= radius * radius,
            TargetSet::BoundaryPatch { center, radius } => {
                y.on_boundary() && dist_sq(&y.xp, center) <= radius * radius
            }
        }
    }

    /// Whether the set reaches the boundary, i.e. carries boundary-atom mass.
    pub fn touches_boundary(&self) -> bool {
        match self {
            TargetSet::Ball { center, radius } => center.x1 <= *radius,
            TargetSet::BoundaryPatch { .. } => true,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, z: &Point) -> Point {
        match self {
            TargetSet::Ball { center, radius } => {
                let d = z.distance_sq(center).sqrt();
                let p = if d <= *radius {
                    z.clone()
                } else {
                    let s = radius / d * (1.0 - 4.0 * f64::EPSILON);
                    Point {
                        x1: center.x1 + s * (z.x1 - center.x1),
                        xp: center
                            .xp
                            .iter()
                            .zip(&z.xp)
                            .map(|(c, v)| c + s * (v - c))
                            .collect(),
                    }
                };
                if p.x1 >= 0.0 {
                    return p;
                }
                // the half-space constraint is active: project onto the chord disc
                let chord = (radius * radius - center.x1 * center.x1).max(0.0).sqrt();
                Point {
                    x1: 0.0,
                    xp: project_disc(&z.xp, &center.xp, chord),
                }
            }
            TargetSet::BoundaryPatch { center, radius } => Point {
                x1: 0.0,
                xp: project_disc(&z.xp, center, *radius),
            },
        }
    }

    /// Centre (projected into the set) and the extreme points along each axis.
    pub fn starts(&self) -> Vec<Point> {
        let mut out = Vec::new();
        match self {
            TargetSet::Ball { center, radius } => {
                out.push(self.project(center));
                for axis in 0..center.dim() {
                    for sign in [-1.0, 1.0] {
                        let mut c = center.coords();
                        c[axis] += sign * radius;
                        c[0] = c[0].max(0.0);
                        out.push(self.project(&Point {
                            x1: c[0],
                            xp: c[1..].to_vec(),
                        }));
                    }
                }
            }
            TargetSet::BoundaryPatch { center, radius } => {
                out.push(Point {
                    x1: 0.0,
                    xp: center.clone(),
                });
                for axis in 0..center.len() {
                    for sign in [-1.0, 1.0] {
                        let mut c = center.clone();
                        c[axis] += sign * radius;
                        out.push(Point { x1: 0.0, xp: c });
                    }
                }
            }
        }
        out
    }

    /// Starts on a regular grid with `per_axis` points per coordinate, projected.
    pub fn grid_starts(&self, per_axis: usize) -> Vec<Point> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            TargetSet::Ball { center, radius } => {
                let c = center.coords();
                (
                    c.iter().map(|v| v - radius).collect(),
                    c.iter().map(|v| v + radius).collect(),
                )
            }
            TargetSet::BoundaryPatch { center, radius } => {
                let mut lo = vec![0.0];
                let mut hi = vec![0.0];
                lo.extend(center.iter().map(|v| v - radius));
                hi.extend(center.iter().map(|v| v + radius));
                (lo, hi)
            }
        };
        let k = lo.len();
        let mut out = Vec::new();
        let total = per_axis.pow(k as u32);
        for mut idx in 0..total {
            let mut c = Vec::with_capacity(k);
            for axis in 0..k {
                let i = idx % per_axis;
                idx /= per_axis;
                let frac = if per_axis == 1 {
                    0.5
                } else {
                    i as f64 / (per_axis - 1) as f64
                };
                c.push(lo[axis] + frac * (hi[axis] - lo[axis]));
            }
            let z = Point {
                x1: c[0].max(0.0),
                xp: c[1..].to_vec(),
            };
            if self.contains(&z) {
                out.push(z);
            }
        }
        out
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn project_disc(z: &[f64], centre: &[f64], radius: f64) -> Vec<f64> {
    let d = dist_sq(z, centre).sqrt();
    if d <= radius {
        return z.to_vec();
    }
    let s = radius / d;
    centre.iter().zip(z).map(|(c, v)| c + s * (v - c)).collect()
}

/// Projected gradient descent with backtracking from one start.
pub(crate) fn descend(
    f: &dyn Fn(&[Point]) -> f64,
    sets: &[TargetSet],
    start: Vec<Point>,
) -> (Vec<Point>, f64) {
    let project = |pts: &[Point]| {
        pts.iter()
            .zip(sets)
            .map(|(p, s)| s.project(p))
            .collect::<Vec<_>>()
    };
    let mut current = project(&start);
    let mut value = f(&current);
    let mut step = 1.0;
    for _ in 0..500 {
        // central-difference gradient in every coordinate of every point
        let mut grad: Vec<Vec<f64>> = Vec::with_capacity(current.len());
        for k in 0..current.len() {
            let coords = current[k].coords();
            let mut g = vec![0.0; coords.len()];
            for axis in 0..coords.len() {
                let h = 1e-7 * (1.0 + coords[axis].abs());
                let eval = |delta: f64| {
                    let mut pts = current.clone();
                    let mut c = coords.clone();
                    c[axis] += delta;
                    pts[k] = Point {
                        x1: c[0].max(0.0),
                        xp: c[1..].to_vec(),
                    };
                    f(&pts)
                };
                let lo = if coords[0] == 0.0 && axis == 0 {
                    (eval(0.0), 0.0)
                } else {
                    (eval(-h), h)
                };
                g[axis] = (eval(h) - lo.0) / (h + lo.1);
            }
            grad.push(g);
        }
        let mut improved = false;
        while step > 1e-14 {
            let trial: Vec<Point> = current
                .iter()
                .zip(&grad)
                .map(|(p, g)| {
                    let c: Vec<f64> = p
                        .coords()
                        .iter()
                        .zip(g)
                        .map(|(v, gv)| v - step * gv)
                        .collect();
                    Point {
                        x1: c[0].max(0.0),
                        xp: c[1..].to_vec(),
                    }
                })
                .collect();
            let trial = project(&trial);
            let tv = f(&trial);
            if tv < value - 1e-15 * value.abs() {
                let moved: f64 = trial
                    .iter()
                    .zip(&current)
                    .map(|(a, b)| a.distance_sq(b))
                    .sum();
                current = trial;
                value = tv;
                improved = moved > 1e-28;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (current, value)
}

/// `inf_{y ∈ E} c(x, y)` by multistart projected descent; returns the minimiser too.
pub fn reference_rate(params: &Params, x: &Point, set: &TargetSet) -> Result<(f64, Point)> {
    params.check_dim(x.dim())?;
    params.check_dim(set.dim())?;
    if set.contains(x) {
        return Ok((0.0, x.clone()));
    }
    let f = |pts: &[Point]| cost(params, x, &pts[0]);
    let mut starts = set.starts();
    starts.extend(set.grid_starts(16));
    let mut best = (f64::INFINITY, x.clone());
    for s in starts {
        let (pts, v) = descend(&f, std::slice::from_ref(set), vec![s]);
        if v < best.0 {
            best = (v, pts[0].clone());
        }
    }
    Ok(best)
}
