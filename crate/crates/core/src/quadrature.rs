//! One-dimensional quadrature: adaptive Gauss–Kronrod with dyadic bisection,
//! fixed Gauss–Legendre rules, and scalar minimisation / root finding.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Accuracy controls for the adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    /// Maximum dyadic bisection depth of any subinterval.
    pub max_subdivisions: usize,
    /// Map `L ∈ [½, 1)` to `u = 1/(1 - L)` in the local-time integral.
    pub endpoint_substitution: bool,
}

impl QuadratureSpec {
    pub fn new(
        relative_tolerance: f64,
        max_subdivisions: usize,
        endpoint_substitution: bool,
    ) -> Result<Self> {
        if !(relative_tolerance > 0.0 && relative_tolerance <= 1e-2) {
            return Err(param(format!(
                "relative_tolerance {relative_tolerance} outside (0, 1e-2]"
            )));
        }
        if max_subdivisions < 8 {
            return Err(param(format!("max_subdivisions {max_subdivisions} < 8")));
        }
        Ok(QuadratureSpec {
            relative_tolerance,
            max_subdivisions,
            endpoint_substitution,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            relative_tolerance: 1e-10,
            max_subdivisions: 20,
            endpoint_substitution: true,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const MAX_INTERVALS: usize = 4096;

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: `(value, error estimate)`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut values = [0.0; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(centre - dx), f(centre + dx));
        values[2 * j] = f1;
        values[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((values[2 * j] - mean).abs() + (values[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let abs_sum = abs_sum * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    (value, err)
}

/// Adaptive integral of `f` over `[a, b]` to `spec.relative_tolerance`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    integrate_with_floor(f, a, b, spec, 0.0)
}

/// As [`integrate`], accepting once the error is below `abs_floor` as well.
pub fn integrate_with_floor<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    abs_floor: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error) = gk15(&mut f, a, b);
    // (left, right, value, error, depth)
    let mut pieces = vec![(a, b, value, error, 0usize)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature {
                tolerance: spec.relative_tolerance,
                estimate: total,
                intervals: pieces.len(),
            });
        }
        if total_err <= (spec.relative_tolerance * total.abs()).max(abs_floor) {
            return Ok(Estimate {
                value: total,
                error: total_err,
                intervals: pieces.len(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.4 < spec.max_subdivisions)
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| pieces.len() < MAX_INTERVALS) else {
            return Err(Error::Quadrature {
                tolerance: spec.relative_tolerance,
                estimate: total,
                intervals: pieces.len(),
            });
        };
        let (l, r, _, _, depth) = pieces.swap_remove(i);
        let mid = 0.5 * (l + r);
        let (v1, e1) = gk15(&mut f, l, mid);
        let (v2, e2) = gk15(&mut f, mid, r);
        pieces.push((l, mid, v1, e1, depth + 1));
        pieces.push((mid, r, v2, e2, depth + 1));
    }
}

/// Fixed `n`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(n: usize, a: f64, b: f64, f: F) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"));
    rule.integrate(a, b, f)
}

/// Golden-section minimum of a unimodal `f` on `[a, b]`: `(argmin, min)`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for x in [a, b, d] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    if fd < best.1 {
        best = (d, fd);
    }
    best
}

/// Root of `f` on a sign-changing bracket `[a, b]` by bisection.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(param(format!("no sign change on [{a}, {b}]")));
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 20, true).is_err());
        assert!(QuadratureSpec::new(0.1, 20, true).is_err());
        assert!(QuadratureSpec::new(1e-8, 7, true).is_err());
        assert!(QuadratureSpec::new(1e-2, 8, false).is_ok());
    }

    #[test]
    fn adaptive_matches_closed_forms() {
        let spec = QuadratureSpec::default();
        let e = integrate(|x: f64| x.exp(), 0.0, 1.0, &spec).unwrap();
        assert!((e.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        let e = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &spec).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-10);
        let e = integrate(|x: f64| (-x * x / 2.0).exp(), -12.0, 12.0, &spec).unwrap();
        assert!((e.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let zero = integrate(|_| 0.0, 0.0, 3.0, &spec).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn reports_failure_instead_of_guessing() {
        let spec = QuadratureSpec::new(1e-10, 8, false).unwrap();
        let r = integrate(|x: f64| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn fixed_rule_and_search() {
        let v = gauss_legendre(200, 0.0, std::f64::consts::PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
        let (x, fx) = golden_section_min(|x| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6 && (fx - 1.0).abs() < 1e-12);
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
