//! Explicit transition kernel of the sticky process.
//!
//! With `n = x₁ + y₁`, `s = |y' - x'|` and `A = a - 1`, the density of
//! `p_t(x, ·)` with respect to `μ = dy + (1/2θ) dσ(y')` is
//!
//! ```text
//! f(x, y) = g⁰_t(x₁, y₁) g(t, s) + 2θt ∫₀¹ h(t(1 - L), θtL + n) g(t(1 + AL), s) dL
//! ```
//!
//! after the rescaling `l = θtL` of the local time. Densities are reported
//! against `dy₁ dy'` in the interior and against `dy'` on the boundary,
//! where the `μ`-density is divided by `2θ`.

mod residuals;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{HalfSpacePoint, ModelParams};
use crate::quadrature::{integrate, integrate_with_floor, Estimate, QuadratureSpec};

pub use residuals::{
    chapman_kolmogorov_residual, fokker_planck_residual, CkGrid, CkResidual, ConstantMuDensity,
    DensityField, FdSteps, FpResidual, KernelField,
};

type Params = ModelParams<f64>;
type Point = HalfSpacePoint<f64>;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param(format!("time must be positive, got {t}")))
    }
}

/// `log h(t, x₁)`, `-∞` at `x₁ = 0`.
fn log_hitting(t: f64, x1: f64) -> f64 {
    if x1 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x1.ln() - LN_SQRT_2PI - 1.5 * t.ln() - x1 * x1 / (2.0 * t)
}

/// `log g⁰_t(x₁, z)`, `-∞` when either argument is zero.
fn log_killed(t: f64, x1: f64, z: f64) -> f64 {
    let product = 2.0 * x1 * z / t;
    if product <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * (2.0 * PI * t).ln() - (x1 - z).powi(2) / (2.0 * t) + (-(-product).exp_m1()).ln()
}

/// `log g(t, ·)` of the `k`-dimensional Gaussian at squared radius `r2`.
fn log_gaussian(t: f64, r2: f64, k: usize) -> f64 {
    -0.5 * k as f64 * (2.0 * PI * t).ln() - r2 / (2.0 * t)
}

/// First hitting time density of `0` for a standard Brownian motion from `x₁`.
pub fn hitting_density(t: f64, x1: f64) -> Result<f64> {
    check_time(t)?;
    if x1 < 0.0 {
        return Err(param(format!("x1 must be nonnegative, got {x1}")));
    }
    Ok(log_hitting(t, x1).exp())
}

/// Transition density of Brownian motion killed at `0`.
pub fn killed_kernel(t: f64, x1: f64, z: f64) -> Result<f64> {
    check_time(t)?;
    if x1 < 0.0 || z < 0.0 {
        return Err(param("killed kernel needs x1, z >= 0"));
    }
    Ok(log_killed(t, x1, z).exp())
}

/// Standard `(d-1)`-dimensional Gaussian density of variance `t`.
pub fn gaussian_density(t: f64, zp: &[f64]) -> Result<f64> {
    check_time(t)?;
    let r2 = zp.iter().map(|v| v * v).sum();
    Ok(log_gaussian(t, r2, zp.len()).exp())
}

/// Pointwise densities of the three parts of the law of `(X¹_t, L_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateDensity {
    /// `2h(t - l/θ, l + x₁ + z)` against `dz dl`.
    pub diffuse: f64,
    /// `(1/θ)h(t - l/θ, l + x₁)` against `δ₀(dz) dl`.
    pub boundary_atom_in_z: f64,
    /// `g⁰_t(x₁, z)` against `dz δ₀(dl)`.
    pub zero_local_time_atom: f64,
}

pub fn bivariate_density(
    params: &Params,
    t: f64,
    x1: f64,
    z: f64,
    l: f64,
) -> Result<BivariateDensity> {
    check_time(t)?;
    let theta = params.theta;
    if x1 < 0.0 || z < 0.0 || !(0.0..=theta * t).contains(&l) {
        return Err(param(format!(
            "bivariate density needs x1, z >= 0 and l in [0, {}]",
            theta * t
        )));
    }
    let tau = t - l / theta;
    let h = |m: f64| {
        if tau > 0.0 {
            log_hitting(tau, m).exp()
        } else {
            0.0
        }
    };
    Ok(BivariateDensity {
        diffuse: 2.0 * h(l + x1 + z),
        boundary_atom_in_z: h(l + x1) / theta,
        zero_local_time_atom: log_killed(t, x1, z).exp(),
    })
}

/// Total masses of the three parts of the law of `(X¹_t, L_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentMasses {
    pub zero_local_time: f64,
    pub boundary_atom: f64,
    pub diffuse: f64,
}

/// `log` of the boundary-atom `L`-marginal on `[0, 1]` (against `dL`).
pub(crate) fn log_boundary_marginal(
    params: &Params,
    t: f64,
    x1: f64,
    level: f64,
    rest: f64,
) -> f64 {
    let m = params.theta * t * level + x1;
    let tau = t * rest;
    if tau <= 0.0 {
        return f64::NEG_INFINITY;
    }
    t.ln() + log_hitting(tau, m)
}

/// `log` of the diffuse `L`-marginal on `[0, 1]` (against `dL`).
pub(crate) fn log_diffuse_marginal(params: &Params, t: f64, x1: f64, level: f64, rest: f64) -> f64 {
    let m = params.theta * t * level + x1;
    let tau = t * rest;
    if tau <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (2.0 * params.theta * t).ln() - 0.5 * (2.0 * PI * tau).ln() - m * m / (2.0 * tau)
}

/// Tail envelopes in `u = 1/(1-L)` for the two marginals, as in [`Sticky::u_envelope`].
fn marginal_envelopes(params: &Params, t: f64, x1: f64) -> ((f64, f64), (f64, f64)) {
    let theta_t = params.theta * t;
    let m_hi = theta_t + x1;
    let m_lo = 0.5 * theta_t + x1;
    let beta = m_lo * m_lo / (2.0 * t);
    let boundary = t.ln() + m_hi.ln() - LN_SQRT_2PI - 1.5 * t.ln();
    let diffuse = (2.0 * params.theta * t).ln() - 0.5 * (2.0 * PI * t).ln();
    ((boundary, beta), (diffuse, beta))
}

pub fn component_masses(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x1: f64,
) -> Result<ComponentMasses> {
    check_time(t)?;
    if x1 < 0.0 {
        return Err(param("x1 must be nonnegative"));
    }
    let zero_local_time = statrs::function::erf::erf(x1 / (2.0 * t).sqrt());
    let (boundary_env, diffuse_env) = marginal_envelopes(params, t, x1);
    let boundary_atom = log_unit_integral(
        &|level, rest| log_boundary_marginal(params, t, x1, level, rest),
        boundary_env,
        spec,
    )?
    .exp();
    let diffuse = log_unit_integral(
        &|level, rest| log_diffuse_marginal(params, t, x1, level, rest),
        diffuse_env,
        spec,
    )?
    .exp();
    Ok(ComponentMasses {
        zero_local_time,
        boundary_atom,
        diffuse,
    })
}

/// Kernel value at `y`, split into its interior (killed) and sticky parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    /// Density against `dy₁ dy'`; at `y₁ = 0` this is the interior limit.
    pub interior_density: f64,
    /// Density against `dy'` on `{y₁ = 0}`, zero for interior `y`.
    pub boundary_density: f64,
    /// `ρ_int = g⁰_t(x₁, y₁) g(t, y' - x')`.
    pub interior_part: f64,
    /// Sticky contribution to `interior_density`.
    pub sticky_part: f64,
}

impl KernelValue {
    /// Density with respect to the stationary measure `μ`.
    pub fn mu_density(&self, params: &Params, y: &Point) -> f64 {
        if y.on_boundary() {
            boundary_to_mu(params, self.boundary_density)
        } else {
            self.interior_density
        }
    }
}

/// Boundary density against `dy'` to density against `μ` (weight `1/2θ`).
pub fn boundary_to_mu(params: &Params, boundary_density: f64) -> f64 {
    2.0 * params.theta * boundary_density
}

/// Local-time integral `J = ∫₀¹ h(t(1-L), θtL + n) g(t(1+AL), s) dL` in log form.
struct Sticky<'a> {
    params: &'a Params,
    t: f64,
    n: f64,
    s2: f64,
}

impl Sticky<'_> {
    /// Log integrand from `L` and `1 - L` given separately.
    fn log_integrand(&self, level: f64, rest: f64) -> f64 {
        let m = self.params.theta * self.t * level + self.n;
        let tau = self.t * rest;
        if m <= 0.0 || tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_hitting(tau, m)
            + log_gaussian(
                self.t * (1.0 + self.params.excess() * level),
                self.s2,
                self.params.d - 1,
            )
    }

    /// Envelope `(c, β)` with `log integrand(u) ≤ c - ½ log u - βu` on `u ≥ 2`,
    /// written in `u = 1/(1-L)` and including the Jacobian.
    fn u_envelope(&self) -> (f64, f64) {
        let theta_t = self.params.theta * self.t;
        let m_hi = theta_t + self.n;
        let m_lo = 0.5 * theta_t + self.n;
        let g_max = log_gaussian(self.t * self.params.a.min(1.0), 0.0, self.params.d - 1);
        let c = m_hi.ln() - LN_SQRT_2PI - 1.5 * self.t.ln() + g_max;
        (c, m_lo * m_lo / (2.0 * self.t))
    }

    fn log_value(&self, spec: &QuadratureSpec) -> Result<f64> {
        log_unit_integral(
            &|level, rest| self.log_integrand(level, rest),
            self.u_envelope(),
            spec,
        )
    }
}

/// `log ∫₀¹ exp(logf(L, 1 - L)) dL` for integrands that vanish at `L = 1`.
///
/// With endpoint substitution the range `[½, 1)` is integrated in
/// `u = 1/(1 - L)` and cut where the envelope `(c, β)` (see
/// [`Sticky::u_envelope`]) leaves a negligible tail.
pub(crate) fn log_unit_integral(
    logf: &dyn Fn(f64, f64) -> f64,
    envelope: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<f64> {
    let lower = |level: f64| logf(level, 1.0 - level);
    if !spec.endpoint_substitution {
        let (shift, est) = peaked_integral(&lower, 0.0, 1.0, &uniform_grid(0.0, 1.0), spec)?;
        return Ok(shift + est.ln());
    }
    let (shift_l, est_l) = peaked_integral(&lower, 0.0, 0.5, &uniform_grid(0.0, 0.5), spec)?;
    let upper = |u: f64| logf(1.0 - 1.0 / u, 1.0 / u) - 2.0 * u.ln();
    let (c, beta) = envelope;
    let mut guess = shift_l;
    for k in 2..60 {
        guess = guess.max(upper(2f64.powi(k)));
    }
    // tail of the envelope beyond `cut` is at most exp(c - ½ log cut - β cut)/β
    let tail = |cut: f64| c - 0.5 * cut.ln() - beta * cut - beta.ln();
    let mut cut = 4.0;
    while tail(cut) > guess - 80.0 {
        cut *= 2.0;
        if cut > 1e300 {
            return Err(Error::Quadrature {
                tolerance: spec.relative_tolerance,
                estimate: f64::NAN,
                intervals: 0,
            });
        }
    }
    let (shift_u, est_u) = peaked_integral(&upper, 2.0, cut, &log_grid(2.0, cut), spec)?;
    Ok(log_add(shift_l + est_l.ln(), shift_u + est_u.ln()))
}

fn uniform_grid(a: f64, b: f64) -> Vec<f64> {
    (1..=32).map(|k| a + (b - a) * k as f64 / 33.0).collect()
}

fn log_grid(a: f64, b: f64) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (1..=40)
        .map(|k| (la + (lb - la) * k as f64 / 41.0).exp())
        .collect()
}

pub(crate) fn log_add(x: f64, y: f64) -> f64 {
    let hi = x.max(y);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((x - hi).exp() + (y - hi).exp()).ln()
}

/// Integral of `exp(logf)` over `[a, b]` returned as `(shift, ∫ exp(logf - shift))`.
///
/// The shift is the largest log value found on `grid` and a golden-section
/// refinement; panels are graded geometrically towards the peak so that
/// narrow maxima cannot slip between the Kronrod nodes.
pub(crate) fn peaked_integral(
    logf: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    graded_integral(logf, a, b, grid, spec, 7, 0.25)
}

/// [`peaked_integral`] with `levels` cuts on each side of the peak, each
/// `ratio` times closer than the last.
pub(crate) fn graded_integral(
    logf: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid: &[f64],
    spec: &QuadratureSpec,
    levels: usize,
    ratio: f64,
) -> Result<(f64, f64)> {
    let (mut best, mut best_val) = (0usize, f64::NEG_INFINITY);
    for (k, x) in grid.iter().enumerate() {
        let v = logf(*x);
        if v > best_val {
            best = k;
            best_val = v;
        }
    }
    if best_val == f64::NEG_INFINITY {
        return Ok((0.0, 0.0));
    }
    let lo = if best == 0 { a } else { grid[best - 1] };
    let hi = if best + 1 == grid.len() {
        b
    } else {
        grid[best + 1]
    };
    let (peak, peak_val) =
        crate::quadrature::golden_section_min(|x| -logf(x), lo, hi, 1e-6 * (b - a));
    let (peak, shift) = if -peak_val > best_val {
        (peak, -peak_val)
    } else {
        (grid[best], best_val)
    };

    let mut cuts = vec![a, b, peak];
    let (left, right) = (peak - a, b - peak);
    let mut scale = 0.5;
    for _ in 0..levels {
        cuts.push(peak - left * scale);
        cuts.push(peak + right * scale);
        scale *= ratio;
    }
    cuts.retain(|c| *c >= a && *c <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (b - a).abs());

    let f = |x: f64| (logf(x) - shift).exp();
    let single = QuadratureSpec {
        relative_tolerance: f64::INFINITY,
        ..*spec
    };
    let panels: Vec<(f64, f64, Estimate)> = cuts
        .windows(2)
        .map(|w| {
            let e = integrate(f, w[0], w[1], &single).unwrap_or(Estimate {
                value: 0.0,
                error: f64::INFINITY,
                intervals: 1,
            });
            (w[0], w[1], e)
        })
        .collect();
    let total: f64 = panels.iter().map(|p| p.2.value).sum();
    let floor = spec.relative_tolerance * total / (4.0 * panels.len() as f64);
    let mut sum = 0.0;
    for (l, r, e) in panels {
        sum += if e.error <= floor {
            e.value
        } else {
            integrate_with_floor(f, l, r, spec, floor)?.value
        };
    }
    Ok((shift, sum))
}

/// `log J(t, n, s)` for the sticky part.
fn log_sticky(params: &Params, spec: &QuadratureSpec, t: f64, n: f64, s2: f64) -> Result<f64> {
    Sticky { params, t, n, s2 }.log_value(spec)
}

fn check_points(params: &Params, x: &Point, y: &Point) -> Result<()> {
    params.check_dim(x.dim())?;
    params.check_dim(y.dim())
}

/// Logs of `(ρ_int, ρ_st)` at `y`; at `y₁ = 0` the sticky part is the interior limit.
fn log_parts(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<(f64, f64)> {
    check_time(t)?;
    check_points(params, x, y)?;
    let s2 =
        x.xp.iter()
            .zip(&y.xp)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>();
    let interior = log_killed(t, x.x1, y.x1) + log_gaussian(t, s2, params.d - 1);
    let sticky = (2.0 * params.theta * t).ln() + log_sticky(params, spec, t, x.x1 + y.x1, s2)?;
    Ok((interior, sticky))
}

/// The kernel `p_t(x, ·)` evaluated at `y`.
pub fn transition_kernel(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<KernelValue> {
    let (li, ls) = log_parts(params, spec, t, x, y)?;
    let interior_part = li.exp();
    let sticky_part = ls.exp();
    let boundary_density = if y.on_boundary() {
        sticky_part / (2.0 * params.theta)
    } else {
        0.0
    };
    Ok(KernelValue {
        interior_density: interior_part + sticky_part,
        boundary_density,
        interior_part,
        sticky_part,
    })
}

/// `log` of the interior density (interior `y`) or of the boundary density
/// (boundary `y`), finite far into the small-time regime.
pub fn log_transition_kernel(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<f64> {
    let value = log_mu_density(params, spec, t, x, y)?;
    Ok(if y.on_boundary() {
        value - (2.0 * params.theta).ln()
    } else {
        value
    })
}

/// `log` of the density of `p_t(x, ·)` with respect to `μ`.
pub fn log_mu_density(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<f64> {
    let (li, ls) = log_parts(params, spec, t, x, y)?;
    let value = log_add(li, ls);
    if !value.is_finite() {
        return Err(Error::ZeroDensity(format!(
            "p_{t}(x, y) underflows to zero"
        )));
    }
    Ok(value)
}

/// Part of `J` coming from `L ∈ [1 - δ, 1]`, integrated directly.
pub fn sticky_tail(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    n: f64,
    s: f64,
    delta: f64,
) -> Result<f64> {
    let sticky = Sticky {
        params,
        t,
        n,
        s2: s * s,
    };
    let f = |level: f64| sticky.log_integrand(level, 1.0 - level);
    let grid: Vec<f64> = (1..=32)
        .map(|k| 1.0 - delta + delta * k as f64 / 33.0)
        .collect();
    let (shift, est) = peaked_integral(&f, 1.0 - delta, 1.0, &grid, spec)?;
    Ok(shift.exp() * est)
}

/// Analytic bound on [`sticky_tail`].
///
/// On `[1 - δ, 1]` the hitting density satisfies `h(τ, m) ≤ m_max τ^{-3/2}
/// e^{-m₀²/2τ}/√(2π)` with `τ ≤ tδ`, and `τ ↦ τ^{-3/2} e^{-m₀²/2τ}` is
/// increasing up to `τ = m₀²/3`.
pub fn sticky_tail_envelope(params: &Params, t: f64, n: f64, delta: f64) -> f64 {
    let theta_t = params.theta * t;
    let m0 = theta_t * (1.0 - delta) + n;
    let m_max = theta_t + n;
    let tau = (t * delta).min(m0 * m0 / 3.0);
    let h_max = m_max / (2.0 * PI).sqrt() * tau.powf(-1.5) * (-m0 * m0 / (2.0 * tau)).exp();
    let g_max = log_gaussian(t * params.a.min(1.0), 0.0, params.d - 1).exp();
    delta * h_max * g_max
}
