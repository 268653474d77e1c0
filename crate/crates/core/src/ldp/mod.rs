//! Large-deviation experiments: ε-log-probabilities of the slowed process
//! against the closed-form rates.
//!
//! The slowed process at time `1` is the original process at time `ε`, so
//! static probabilities are integrals of the kernel at `t = ε`.

mod fit;
mod sets;

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{cone_threshold, discrete_cost, HalfSpacePoint, ModelParams};
use crate::kernel::{
    graded_integral, log_add, log_mu_density, log_transition_kernel, peaked_integral,
};
use crate::quadrature::{bisect, QuadratureSpec};
use crate::simulator::{path_rng, SimConfig, Simulator};
use crate::stats::{wilson_interval, Z_99};

pub use fit::{fit_rate, RateFit};
pub use sets::{reference_rate, TargetSet};

type Params = ModelParams<f64>;
type Point = HalfSpacePoint<f64>;

/// Table resolution used by Monte Carlo experiments.
pub const MC_RESOLUTION: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo { n_paths: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticExperiment {
    pub params: Params,
    pub x: Point,
    pub target: TargetSet,
    pub epsilons: Vec<f64>,
    pub method: Method,
}

impl StaticExperiment {
    pub fn new(
        params: Params,
        x: Point,
        target: TargetSet,
        epsilons: Vec<f64>,
        method: Method,
    ) -> Result<Self> {
        params.check_dim(x.dim())?;
        params.check_dim(target.dim())?;
        check_epsilons(&epsilons)?;
        Ok(StaticExperiment {
            params,
            x,
            target,
            epsilons,
            method,
        })
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(param("epsilons must be positive and nonempty"));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(param("epsilons must decrease strictly"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpEstimate {
    /// The ε values that entered the fit.
    pub epsilons: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `ε log ρ^ε(E)`.
    pub log_probs: Vec<f64>,
    /// Wilson 99% intervals of Monte Carlo probabilities.
    pub intervals: Option<Vec<(f64, f64)>>,
    /// ε values dropped for underflow or zero hits.
    pub dropped: Vec<f64>,
    pub extrapolated_rate: f64,
    pub beta: f64,
    pub gamma: f64,
    pub reference_rate: f64,
}

/// Collects the first error raised inside a closure that must return `f64`.
struct Trap(RefCell<Option<Error>>);

impl Trap {
    fn new() -> Self {
        Trap(RefCell::new(None))
    }

    fn catch(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn check<T>(self, value: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => value,
        }
    }
}

fn uniform(a: f64, b: f64) -> Vec<f64> {
    (1..=32).map(|k| a + (b - a) * k as f64 / 33.0).collect()
}

/// `log ∫_{[a, b]} exp(logf)` with peak-aware panels.
fn log_integral(logf: &dyn Fn(f64) -> f64, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if b <= a {
        return Ok(f64::NEG_INFINITY);
    }
    let (shift, est) = peaked_integral(logf, a, b, &uniform(a, b), spec)?;
    Ok(shift + est.ln())
}

/// Cheaper variant of [`log_integral`] for the nested levels of a ball.
fn log_integral_lean(
    logf: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if b <= a {
        return Ok(f64::NEG_INFINITY);
    }
    let grid: Vec<f64> = (1..=12).map(|k| a + (b - a) * k as f64 / 13.0).collect();
    let (shift, est) = graded_integral(logf, a, b, &grid, spec, 4, 0.2)?;
    Ok(shift + est.ln())
}

/// `log P_x(X_t ∈ E)` by quadrature of the kernel over `E` (planar case).
pub fn log_probability(
    params: &Params,
    spec: &QuadratureSpec,
    t: f64,
    x: &Point,
    set: &TargetSet,
) -> Result<f64> {
    if params.d != 2 {
        return Err(param(
            "quadrature probabilities are implemented for d = 2; use Monte Carlo",
        ));
    }
    params.check_dim(x.dim())?;
    params.check_dim(set.dim())?;
    let inner_spec = QuadratureSpec {
        relative_tolerance: spec.relative_tolerance.max(1e-7),
        ..*spec
    };
    let trap = Trap::new();
    let boundary = |c2: f64, half: f64| -> Result<f64> {
        let f = |y2: f64| {
            trap.catch(log_transition_kernel(
                params,
                spec,
                t,
                x,
                &Point {
                    x1: 0.0,
                    xp: vec![y2],
                },
            ))
        };
        log_integral(&f, c2 - half, c2 + half, &inner_spec)
    };
    let value = match set {
        TargetSet::BoundaryPatch { center, radius } => boundary(center[0], *radius),
        TargetSet::Ball { center, radius } => {
            let (c1, c2, r) = (center.x1, center.xp[0], *radius);
            // y₁ = c₁ + r sin φ removes the square-root edges of the chord length
            let interior = |phi: f64| {
                let (y1, half) = ((c1 + r * phi.sin()).max(0.0), r * phi.cos());
                let f = |y2: f64| {
                    trap.catch(log_mu_density(
                        params,
                        spec,
                        t,
                        x,
                        &Point {
                            x1: y1,
                            xp: vec![y2],
                        },
                    ))
                };
                trap.catch(log_integral_lean(&f, c2 - half, c2 + half, &inner_spec)) + half.ln()
            };
            let lowest = (-c1 / r).max(-1.0).asin();
            let bulk =
                log_integral_lean(&interior, lowest, std::f64::consts::FRAC_PI_2, &inner_spec);
            match (bulk, set.touches_boundary()) {
                (Ok(b), true) => {
                    boundary(c2, (r * r - c1 * c1).max(0.0).sqrt()).map(|s| log_add(b, s))
                }
                (other, _) => other,
            }
        }
    };
    trap.check(value)
}

fn finish(
    epsilons: &[f64],
    probs: Vec<(f64, Option<(f64, f64)>)>,
    logs: Vec<f64>,
    reference_rate: f64,
) -> Result<LdpEstimate> {
    let mut kept = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut dropped = Vec::new();
    for ((e, (p, ci)), l) in epsilons.iter().zip(probs).zip(logs) {
        if l.is_finite() {
            kept.0.push(*e);
            kept.1.push(p);
            kept.2.push(e * l);
            kept.3.push(ci);
        } else {
            dropped.push(*e);
        }
    }
    if kept.0.is_empty() {
        return Err(Error::Experiment(format!(
            "every epsilon underflowed or had no hits: {dropped:?}"
        )));
    }
    let fit = fit_rate(&kept.0, &kept.2)?;
    let intervals = kept
        .3
        .iter()
        .all(Option::is_some)
        .then(|| kept.3.iter().map(|c| c.unwrap()).collect());
    Ok(LdpEstimate {
        epsilons: kept.0,
        probabilities: kept.1,
        log_probs: kept.2,
        intervals,
        dropped,
        extrapolated_rate: fit.rate,
        beta: fit.beta,
        gamma: fit.gamma,
        reference_rate,
    })
}

/// Static LDP experiment: `ε log P_x(X_ε ∈ E)` and its extrapolated rate.
pub fn static_ldp(exp: &StaticExperiment, spec: &QuadratureSpec) -> Result<LdpEstimate> {
    let (reference, _) = reference_rate(&exp.params, &exp.x, &exp.target)?;
    let (probs, logs): (Vec<_>, Vec<_>) = match exp.method {
        Method::Quadrature => exp
            .epsilons
            .par_iter()
            .map(|eps| log_probability(&exp.params, spec, *eps, &exp.x, &exp.target))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|l| ((l.exp(), None), l))
            .unzip(),
        Method::MonteCarlo { n_paths, seed } => {
            let waypoints = [(1.0, exp.target.clone())];
            mc_probabilities(
                &exp.params,
                &exp.x,
                &waypoints,
                &exp.epsilons,
                n_paths,
                seed,
            )?
        }
    };
    finish(&exp.epsilons, probs, logs, reference)
}

type McColumn = (Vec<(f64, Option<(f64, f64)>)>, Vec<f64>);

/// Monte Carlo probabilities of the slowed process visiting every waypoint set.
///
/// Fixed-effort splitting: each waypoint is a stage of `n_paths` trials
/// restarted round-robin from the survivors of the previous stage, and the
/// probability is the product of the stage frequencies. With one waypoint this
/// is the plain frequency.
fn mc_probabilities(
    params: &Params,
    x: &Point,
    waypoints: &[(f64, TargetSet)],
    epsilons: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<McColumn> {
    if n_paths == 0 {
        return Err(param("n_paths must be positive"));
    }
    let sim = Simulator::new(*params, MC_RESOLUTION)?;
    let stages = waypoints.len() as u64;
    let mut probs = Vec::with_capacity(epsilons.len());
    let mut logs = Vec::with_capacity(epsilons.len());
    for (k, eps) in epsilons.iter().enumerate() {
        let mut survivors = vec![x.clone()];
        let (mut p, mut lo, mut hi, mut log_p) = (1.0, 1.0, 1.0, 0.0);
        let mut last = 0.0;
        for (s, (time, set)) in waypoints.iter().enumerate() {
            let dt = eps * (time - last);
            last = *time;
            let stream = (k as u64 * stages + s as u64) * n_paths as u64;
            let reached = (0..n_paths)
                .into_par_iter()
                .map(|j| -> Result<Option<Point>> {
                    let mut rng = path_rng(seed, stream + j as u64);
                    let mut state = survivors[j % survivors.len()].clone();
                    let (x1, dl) = sim.step_horizontal(&mut rng, state.x1, dt)?;
                    let shift = sim.step_vertical(&mut rng, dt, (dl / params.theta).min(dt))?;
                    state.x1 = x1;
                    for (c, v) in state.xp.iter_mut().zip(shift) {
                        *c += v;
                    }
                    Ok(set.contains(&state).then_some(state))
                })
                .collect::<Result<Vec<_>>>()?;
            survivors = reached.into_iter().flatten().collect();
            let hits = survivors.len();
            let (l, h) = wilson_interval(hits, n_paths, Z_99);
            let q = hits as f64 / n_paths as f64;
            p *= q;
            lo *= l;
            hi *= h;
            log_p += q.ln();
            if hits == 0 {
                break;
            }
        }
        probs.push((p, Some((lo, hi))));
        logs.push(log_p);
    }
    Ok((probs, logs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub a: f64,
    pub extrapolated_rate: f64,
    pub reference_rate: f64,
    pub euclidean_rate: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub rows: Vec<ScanRow>,
    /// Root of `|y' - x'| = (1/√A)[x₁ + y₁ + 2√a √(x₁y₁)]` in `a`.
    pub crossing: Option<f64>,
    /// Where the empirical rates leave their `a ≤ 1` level.
    pub kink: Option<f64>,
}

/// Bisection root in `a > 1` of the cone equality for the pair `(x, y)`.
pub fn cone_crossing(theta: f64, x: &Point, y: &Point) -> Option<f64> {
    let gap = |a: f64| {
        let params = ModelParams::new(a, theta, x.dim()).expect("a > 1");
        x.tangential_distance(y) - cone_threshold(&params, x, y)
    };
    bisect(gap, 1.0 + 1e-12, 1e6, 1e-12).ok()
}

/// Static rates at a ball around `y` for each `a`, with the kink location.
pub fn phase_transition_scan(
    params_list: &[Params],
    x: &Point,
    y: &Point,
    radius: f64,
    epsilons: &[f64],
    spec: &QuadratureSpec,
) -> Result<PhaseScan> {
    if params_list.is_empty() {
        return Err(param("empty parameter list"));
    }
    check_epsilons(epsilons)?;
    let target = TargetSet::ball(y.clone(), radius)?;
    let rows = params_list
        .par_iter()
        .map(|params| -> Result<ScanRow> {
            let exp = StaticExperiment::new(
                *params,
                x.clone(),
                target.clone(),
                epsilons.to_vec(),
                Method::Quadrature,
            )?;
            let est = static_ldp(&exp, spec)?;
            let euclid = ModelParams::new(1.0, params.theta, params.d)?;
            Ok(ScanRow {
                a: params.a,
                extrapolated_rate: est.extrapolated_rate,
                reference_rate: est.reference_rate,
                euclidean_rate: reference_rate(&euclid, x, &target)?.0,
                beta: est.beta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossing = cone_crossing(params_list[0].theta, x, y);
    let kink = locate_kink(&rows);
    Ok(PhaseScan {
        rows,
        crossing,
        kink,
    })
}

/// Intersection of the flat `a ≤ 1` level with the line through the first two
/// rows that sit clearly (3%) below it.
fn locate_kink(rows: &[ScanRow]) -> Option<f64> {
    let flat: Vec<f64> = rows
        .iter()
        .filter(|r| r.a <= 1.0)
        .map(|r| r.extrapolated_rate)
        .collect();
    if flat.is_empty() {
        return None;
    }
    let level = flat.iter().sum::<f64>() / flat.len() as f64;
    let mut below: Vec<&ScanRow> = rows
        .iter()
        .filter(|r| r.a > 1.0 && r.extrapolated_rate < 0.97 * level)
        .collect();
    below.sort_by(|p, q| p.a.total_cmp(&q.a));
    let (p, q) = (below.first()?, below.get(1)?);
    let slope = (q.extrapolated_rate - p.extrapolated_rate) / (q.a - p.a);
    if !(slope < 0.0) {
        return None;
    }
    Some(p.a + (level - p.extrapolated_rate) / slope)
}

/// Reference rate `min C^N` over waypoint choices, with the minimising chain.
pub fn sliced_reference_rate(
    params: &Params,
    x: &Point,
    waypoints: &[(f64, TargetSet)],
) -> Result<(f64, Vec<Point>)> {
    check_waypoints(params, waypoints)?;
    let mut times = vec![0.0];
    times.extend(waypoints.iter().map(|w| w.0));
    let sets: Vec<TargetSet> = waypoints.iter().map(|w| w.1.clone()).collect();
    let f = |pts: &[Point]| {
        let mut chain = vec![x.clone()];
        chain.extend_from_slice(pts);
        discrete_cost(params, &times, &chain).unwrap_or(f64::INFINITY)
    };
    let per_set: Vec<Vec<Point>> = sets.iter().map(TargetSet::starts).collect();
    let total: usize = per_set.iter().map(Vec::len).product();
    let mut best = (f64::INFINITY, Vec::new());
    for mut idx in 0..total.min(1 << 14) {
        let start: Vec<Point> = per_set
            .iter()
            .map(|choices| {
                let i = idx % choices.len();
                idx /= choices.len();
                choices[i].clone()
            })
            .collect();
        let (pts, v) = sets::descend(&f, &sets, start);
        if v < best.0 {
            best = (v, pts);
        }
    }
    Ok(best)
}

fn check_waypoints(params: &Params, waypoints: &[(f64, TargetSet)]) -> Result<()> {
    if waypoints.is_empty() {
        return Err(param("need at least one waypoint"));
    }
    let mut last = 0.0;
    for (t, set) in waypoints {
        if !(*t > last && *t <= 1.0) {
            return Err(param("waypoint times must increase strictly within (0, 1]"));
        }
        params.check_dim(set.dim())?;
        last = *t;
    }
    Ok(())
}

/// Path-slicing LDP: probability that the slowed path visits every waypoint set.
pub fn sliced_ldp(
    params: &Params,
    x: &Point,
    waypoints: &[(f64, TargetSet)],
    epsilons: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<LdpEstimate> {
    params.check_dim(x.dim())?;
    check_epsilons(epsilons)?;
    let (reference, _) = sliced_reference_rate(params, x, waypoints)?;
    let (probs, logs) = mc_probabilities(params, x, waypoints, epsilons, n_paths, seed)?;
    finish(epsilons, probs, logs, reference)
}

/// Configuration of a single exact step of length `ε`, as used by the experiments.
pub fn one_step_config(params: &Params, x: &Point, eps: f64, seed: u64) -> Result<SimConfig> {
    SimConfig::new(*params, x.clone(), eps, 1, seed, MC_RESOLUTION)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x1: f64, x2: f64) -> Point {
        Point::planar(x1, x2).unwrap()
    }

    #[test]
    fn validation() {
        let params = ModelParams::new(2.0, 1.0, 2).unwrap();
        let set = TargetSet::ball(p(0.0, 1.0), 0.1).unwrap();
        assert!(StaticExperiment::new(
            params,
            p(0.0, 0.0),
            set.clone(),
            vec![0.1, 0.2],
            Method::Quadrature
        )
        .is_err());
        assert!(StaticExperiment::new(
            params,
            p(0.0, 0.0),
            set.clone(),
            vec![],
            Method::Quadrature
        )
        .is_err());
        assert!(TargetSet::ball(p(0.0, 1.0), 0.0).is_err());
        assert!(sliced_reference_rate(
            &params,
            &p(0.0, 0.0),
            &[(0.5, set.clone()), (0.4, set.clone())]
        )
        .is_err());
        assert!(sliced_reference_rate(&params, &p(0.0, 0.0), &[(1.5, set)]).is_err());
    }

    #[test]
    fn ball_probability_matches_total_mass() {
        let spec = QuadratureSpec::default();
        let params = ModelParams::new(2.0, 1.0, 2).unwrap();
        let x = p(0.3, 0.0);
        let big = TargetSet::ball(p(0.0, 0.0), 12.0).unwrap();
        let mass = log_probability(&params, &spec, 0.5, &x, &big)
            .unwrap()
            .exp();
        assert!((mass - 1.0).abs() < 1e-7, "{mass}");
    }

    #[test]
    fn crossing_root() {
        let a_star = cone_crossing(1.0, &p(1.0, 0.0), &p(1.0, 5.0)).unwrap();
        let params = ModelParams::new(a_star, 1.0, 2).unwrap();
        assert!((cone_threshold(&params, &p(1.0, 0.0), &p(1.0, 5.0)) - 5.0).abs() < 1e-9);
        assert!((a_star - 1.91).abs() < 0.01, "{a_star}");
    }

    #[test]
    fn geodesic_waypoints_are_additive() {
        let params = ModelParams::new(4.0, 1.0, 2).unwrap();
        let x = p(0.0, 0.0);
        let chain = [x.clone(), p(0.0, 1.0), p(0.0, 2.0)];
        let c = discrete_cost(&params, &[0.0, 0.5, 1.0], &chain).unwrap();
        assert!((c - 0.5).abs() < 1e-12);
        let pulled = [x.clone(), p(0.3, 1.2), p(0.0, 2.0)];
        assert!(discrete_cost(&params, &[0.0, 0.5, 1.0], &pulled).unwrap() > c);
        let waypoints = [
            (0.5, TargetSet::boundary_patch(vec![1.0], 0.25).unwrap()),
            (1.0, TargetSet::boundary_patch(vec![2.0], 0.25).unwrap()),
        ];
        let (rate, _) = sliced_reference_rate(&params, &x, &waypoints).unwrap();
        assert!((rate - 1.75f64.powi(2) / 8.0).abs() < 1e-9, "{rate}");
        let single = [(1.0, TargetSet::boundary_patch(vec![2.0], 0.25).unwrap())];
        let (static_rate, _) = reference_rate(&params, &x, &single[0].1).unwrap();
        assert!(
            (sliced_reference_rate(&params, &x, &single).unwrap().0 - static_rate).abs() < 1e-12
        );
    }
}
