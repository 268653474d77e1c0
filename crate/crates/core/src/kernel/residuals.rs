//! Consistency residuals of the kernel: Chapman–Kolmogorov and the
//! Fokker–Planck system
//!
//! ```text
//! ∂_t u = ½ Δu                         in D
//! ∂_t v = (a/2) Δ_Γ v + ½ ∂_{y₁} u     on ∂D
//! ½ u = θ v                            on ∂D
//! ```
//!
//! with `u` the interior density and `v` the boundary density of `p_t(x, ·)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{transition_kernel, Params, Point};
use crate::error::{param, Error, Result};
use crate::quadrature::QuadratureSpec;

/// A time-dependent pair `(u_t, v_t)` of interior and boundary densities.
pub trait DensityField: Sync {
    /// Interior density at `y`; at `y₁ = 0` the boundary limit.
    fn interior(&self, t: f64, y: &Point) -> Result<f64>;
    /// Boundary density against `dy'`.
    fn boundary(&self, t: f64, yp: &[f64]) -> Result<f64>;
}

/// `y ↦ p_t(x, y)` for a fixed starting point.
pub struct KernelField<'a> {
    pub params: &'a Params,
    pub spec: &'a QuadratureSpec,
    pub x: &'a Point,
}

impl DensityField for KernelField<'_> {
    fn interior(&self, t: f64, y: &Point) -> Result<f64> {
        Ok(transition_kernel(self.params, self.spec, t, self.x, y)?.interior_density)
    }

    fn boundary(&self, t: f64, yp: &[f64]) -> Result<f64> {
        let y = Point {
            x1: 0.0,
            xp: yp.to_vec(),
        };
        Ok(transition_kernel(self.params, self.spec, t, self.x, &y)?.boundary_density)
    }
}

/// The stationary measure itself: `μ`-density identically one.
pub struct ConstantMuDensity {
    pub theta: f64,
}

impl DensityField for ConstantMuDensity {
    fn interior(&self, _t: f64, _y: &Point) -> Result<f64> {
        Ok(1.0)
    }

    fn boundary(&self, _t: f64, _yp: &[f64]) -> Result<f64> {
        Ok(1.0 / (2.0 * self.theta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub dt: f64,
    pub dh: f64,
}

/// Max-norm residuals of the three Fokker–Planck relations over the stencil.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpResidual {
    pub interior: f64,
    pub boundary: f64,
    pub trace: f64,
}

fn shifted(y: &Point, axis: usize, h: f64) -> Point {
    let mut z = y.clone();
    if axis == 0 {
        z.x1 += h;
    } else {
        z.xp[axis - 1] += h;
    }
    z
}

/// Fokker–Planck residuals of `p_t(x, ·)`.
pub fn fokker_planck_residual(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    steps: FdSteps,
) -> Result<FpResidual> {
    params.check_dim(x.dim())?;
    let noise = 100.0 * spec.relative_tolerance;
    if steps.dh * steps.dh < noise || steps.dt < noise {
        return Err(Error::StepTooSmall(format!(
            "steps {steps:?} drown in quadrature noise at tolerance {}",
            spec.relative_tolerance
        )));
    }
    field_residual(&KernelField { params, spec, x }, params, t, &x.xp, steps)
}

/// Residuals of an arbitrary density field on a stencil around `(0, centre)`.
pub fn field_residual(
    field: &dyn DensityField,
    params: &Params,
    t: f64,
    centre: &[f64],
    steps: FdSteps,
) -> Result<FpResidual> {
    if t < 0.1 {
        return Err(param(format!("finite differences need t >= 0.1, got {t}")));
    }
    let FdSteps { dt, dh } = steps;
    if !(dt > 0.0 && dh > 0.0 && dt < t) {
        return Err(param(format!("invalid steps {steps:?}")));
    }
    let offsets = [-0.5, 0.0, 0.5];
    let mut interior_points = Vec::new();
    for y1 in [0.25, 0.5, 1.0] {
        for off in offsets {
            let mut xp = centre.to_vec();
            xp[0] += off;
            interior_points.push(Point { x1: y1, xp });
        }
    }
    let interior: Vec<f64> = interior_points
        .par_iter()
        .map(|y| -> Result<f64> {
            let dudt = (field.interior(t + dt, y)? - field.interior(t - dt, y)?) / (2.0 * dt);
            let centre_val = field.interior(t, y)?;
            let mut laplacian = 0.0;
            for axis in 0..params.d {
                let up = field.interior(t, &shifted(y, axis, dh))?;
                let down = field.interior(t, &shifted(y, axis, -dh))?;
                laplacian += (up - 2.0 * centre_val + down) / (dh * dh);
            }
            Ok((dudt - 0.5 * laplacian).abs())
        })
        .collect::<Result<_>>()?;

    let boundary_points: Vec<Vec<f64>> = offsets
        .iter()
        .map(|off| {
            let mut xp = centre.to_vec();
            xp[0] += off;
            xp
        })
        .collect();
    let boundary: Vec<(f64, f64)> = boundary_points
        .par_iter()
        .map(|yp| -> Result<(f64, f64)> {
            let dvdt = (field.boundary(t + dt, yp)? - field.boundary(t - dt, yp)?) / (2.0 * dt);
            let v = field.boundary(t, yp)?;
            let mut laplacian = 0.0;
            for axis in 0..yp.len() {
                let mut up = yp.clone();
                let mut down = yp.clone();
                up[axis] += dh;
                down[axis] -= dh;
                laplacian +=
                    (field.boundary(t, &up)? - 2.0 * v + field.boundary(t, &down)?) / (dh * dh);
            }
            let at = |y1: f64| {
                field.interior(
                    t,
                    &Point {
                        x1: y1,
                        xp: yp.clone(),
                    },
                )
            };
            let (u0, u1, u2) = (at(0.0)?, at(dh)?, at(2.0 * dh)?);
            let normal = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * dh);
            let boundary = (dvdt - 0.5 * params.a * laplacian - 0.5 * normal).abs();
            let trace = (0.5 * (2.0 * u1 - u2) - params.theta * v).abs();
            Ok((boundary, trace))
        })
        .collect::<Result<_>>()?;

    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    Ok(FpResidual {
        interior: max(&mut interior.iter().copied()),
        boundary: max(&mut boundary.iter().map(|b| b.0)),
        trace: max(&mut boundary.iter().map(|b| b.1)),
    })
}

/// Midpoint grid over `[0, R₁] × [c - R, c + R]^{d-1}` plus the boundary slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkGrid {
    pub normal_extent: f64,
    pub tangential_extent: f64,
    pub normal_cells: usize,
    pub tangential_cells: usize,
}

impl CkGrid {
    pub fn new(
        normal_extent: f64,
        tangential_extent: f64,
        normal_cells: usize,
        tangential_cells: usize,
    ) -> Result<Self> {
        if !(normal_extent > 0.0 && tangential_extent > 0.0)
            || normal_cells < 2
            || tangential_cells < 2
        {
            return Err(param(
                "grid needs positive extents and at least two cells per axis",
            ));
        }
        Ok(CkGrid {
            normal_extent,
            tangential_extent,
            normal_cells,
            tangential_cells,
        })
    }

    fn coarsened(&self) -> Self {
        CkGrid {
            normal_cells: self.normal_cells / 2,
            tangential_cells: self.tangential_cells / 2,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkResidual {
    pub residual: f64,
    /// `p_{s+t}(x, y)` as a `μ`-density.
    pub direct: f64,
    /// `∫ p_s(x, ·) p_t(·, y) dμ` on the grid.
    pub composed: f64,
    /// The same integral on the grid with half the cells per axis.
    pub coarse_composed: f64,
    /// The grid halving moved the integral by more than 0.1%.
    pub warning: bool,
}

fn mu_density(params: &Params, spec: &QuadratureSpec, t: f64, x: &Point, y: &Point) -> Result<f64> {
    Ok(transition_kernel(params, spec, t, x, y)?.interior_density)
}

fn tangential_nodes(centre: &[f64], grid: &CkGrid) -> (Vec<Vec<f64>>, f64) {
    let k = centre.len();
    let h = 2.0 * grid.tangential_extent / grid.tangential_cells as f64;
    let total = grid.tangential_cells.pow(k as u32);
    let nodes = (0..total)
        .map(|mut idx| {
            (0..k)
                .map(|axis| {
                    let i = idx % grid.tangential_cells;
                    idx /= grid.tangential_cells;
                    centre[axis] - grid.tangential_extent + (i as f64 + 0.5) * h
                })
                .collect()
        })
        .collect();
    (nodes, h.powi(k as i32))
}

fn composed(
    params: &Params,
    spec: &QuadratureSpec,
    s: f64,
    t: f64,
    x: &Point,
    y: &Point,
    grid: &CkGrid,
) -> Result<f64> {
    let centre: Vec<f64> = x.xp.iter().zip(&y.xp).map(|(a, b)| 0.5 * (a + b)).collect();
    let (tangential, cell) = tangential_nodes(&centre, grid);
    let hn = grid.normal_extent / grid.normal_cells as f64;
    let pair = |z: &Point| -> Result<f64> {
        Ok(mu_density(params, spec, s, x, z)? * mu_density(params, spec, t, z, y)?)
    };
    let interior: f64 = (0..grid.normal_cells)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let x1 = (i as f64 + 0.5) * hn;
            let mut acc = 0.0;
            for zp in &tangential {
                acc += pair(&Point { x1, xp: zp.clone() })?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let boundary: f64 = tangential
        .par_iter()
        .map(|zp| {
            pair(&Point {
                x1: 0.0,
                xp: zp.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(interior * hn * cell + boundary * cell / (2.0 * params.theta))
}

/// `|p_{s+t}(x, y) - ∫ p_s(x, z) p_t(z, y) μ(dz)|` with `μ`-densities.
pub fn chapman_kolmogorov_residual(
    params: &Params,
    spec: &QuadratureSpec,
    s: f64,
    t: f64,
    x: &Point,
    y: &Point,
    grid: &CkGrid,
) -> Result<CkResidual> {
    if !(s > 0.0 && t > 0.0) {
        return Err(param("Chapman-Kolmogorov needs s, t > 0"));
    }
    params.check_dim(x.dim())?;
    params.check_dim(y.dim())?;
    let direct = mu_density(params, spec, s + t, x, y)?;
    let fine = composed(params, spec, s, t, x, y, grid)?;
    let coarse = composed(params, spec, s, t, x, y, &grid.coarsened())?;
    Ok(CkResidual {
        residual: (direct - fine).abs(),
        direct,
        composed: fine,
        coarse_composed: coarse,
        warning: (fine - coarse).abs() > 1e-3 * fine.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_density_has_zero_residual() {
        for (a, theta) in [(0.5, 1.0), (2.0, 0.3), (1.0, 4.0)] {
            let params = Params::new(a, theta, 2).unwrap();
            let r = field_residual(
                &ConstantMuDensity { theta },
                &params,
                0.5,
                &[0.0],
                FdSteps { dt: 1e-2, dh: 1e-2 },
            )
            .unwrap();
            assert_eq!(
                r,
                FpResidual {
                    interior: 0.0,
                    boundary: 0.0,
                    trace: 0.0
                }
            );
        }
    }

    #[test]
    fn trace_condition_holds() {
        let spec = QuadratureSpec::new(1e-12, 30, true).unwrap();
        let params = Params::new(1.0, 1.0, 2).unwrap();
        let x = Point::planar(0.0, 0.0).unwrap();
        let r = fokker_planck_residual(&params, &spec, 0.5, &x, FdSteps { dt: 1e-3, dh: 1e-3 })
            .unwrap();
        assert!(r.trace <= 1e-6, "{r:?}");
    }

    #[test]
    fn rejects_tiny_steps() {
        let spec = QuadratureSpec::default();
        let params = Params::new(1.0, 1.0, 2).unwrap();
        let x = Point::planar(0.0, 0.0).unwrap();
        let r = fokker_planck_residual(&params, &spec, 0.5, &x, FdSteps { dt: 1e-3, dh: 1e-6 });
        assert!(matches!(r, Err(Error::StepTooSmall(_))));
        assert!(
            fokker_planck_residual(&params, &spec, 0.05, &x, FdSteps { dt: 1e-3, dh: 1e-2 })
                .is_err()
        );
    }

    #[test]
    fn small_time_composition_reduces_to_kernel() {
        let spec = QuadratureSpec::default();
        let params = Params::new(2.0, 1.0, 2).unwrap();
        let x = Point::planar(0.0, 0.0).unwrap();
        let y = Point::planar(0.3, 0.2).unwrap();
        let grid = CkGrid::new(3.0, 3.0, 300, 300).unwrap();
        let r = chapman_kolmogorov_residual(&params, &spec, 1e-3, 0.5, &x, &y, &grid).unwrap();
        assert!(r.residual < 5e-2 * r.direct, "{r:?}");
    }
}
