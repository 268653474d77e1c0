//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL` line before asserting.

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sticky_core::geometry::{action, cost, distance, sticky_rate, sticky_rate_profile};
use sticky_core::kernel::{
    chapman_kolmogorov_residual, component_masses, fokker_planck_residual, transition_kernel,
    CkGrid, FdSteps,
};
use sticky_core::ldp::{
    phase_transition_scan, sliced_ldp, sliced_reference_rate, static_ldp, Method, StaticExperiment,
    TargetSet,
};
use sticky_core::quadrature::{golden_section_min, integrate, QuadratureSpec};
use sticky_core::simulator::{SimConfig, Simulator};
use sticky_core::stats::{ks_critical_1pct, ks_statistic, least_squares};
use sticky_core::transport::{gamma_limit_experiment, kantorovich, DiscreteMeasure};
use sticky_core::{Params, PlPath, Point};

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs criteria one at a time so that their runtimes are not shared.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, pass: bool, detail: String) {
    println!(
        "criterion {id:>2}: {} | {title} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn p(x1: f64, x2: f64) -> Point {
    Point::planar(x1, x2).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    let x1 = if rng.random::<f64>() < 0.2 {
        0.0
    } else {
        rng.random_range(0.0..2.0)
    };
    p(x1, rng.random_range(-3.0..3.0))
}

// ---------------------------------------------------------------- criterion 1

/// Action of a piecewise-linear path on the uniform partition of `[0, 1]`.
fn pl_action(a: f64, knots: &[[f64; 2]]) -> f64 {
    let dt = 1.0 / (knots.len() - 1) as f64;
    knots
        .windows(2)
        .map(|w| {
            let (d1, d2) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            if w[0][0] == 0.0 && w[1][0] == 0.0 {
                d2 * d2 / (2.0 * a * dt)
            } else {
                (d1 * d1 + d2 * d2) / (2.0 * dt)
            }
        })
        .sum()
}

/// Best knots for a path that stays in the interior for `j` steps, on the
/// boundary for `b` steps and in the interior for the remaining `r` steps.
fn labelled_path(
    a: f64,
    x: [f64; 2],
    y: [f64; 2],
    (j, b, r): (usize, usize, usize),
) -> Vec<[f64; 2]> {
    let segments = j + b + r;
    let weights: Vec<f64> = (0..segments)
        .map(|k| if k >= j && k < j + b { a } else { 1.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut knots = vec![x];
    let mut acc = 0.0;
    for k in 1..=segments {
        acc += weights[k - 1];
        let x1 = if k <= j {
            x[0] * (j - k) as f64 / j as f64
        } else if k <= j + b {
            0.0
        } else {
            y[0] * (k - j - b) as f64 / r as f64
        };
        knots.push([x1, x[1] + (y[1] - x[1]) * acc / total]);
    }
    knots
}

/// Projected gradient descent on the interior knots with backtracking.
fn polish(a: f64, knots: &mut [[f64; 2]]) -> f64 {
    let n = knots.len();
    let mut value = pl_action(a, knots);
    let mut step = 1e-3;
    for _ in 0..300 {
        let mut grad = vec![[0.0; 2]; n];
        for k in 1..n - 1 {
            for c in 0..2 {
                let h = 1e-7;
                let mut plus = knots.to_vec();
                plus[k][c] += h;
                let mut minus = knots.to_vec();
                minus[k][c] = (minus[k][c] - h).max(0.0);
                grad[k][c] =
                    (pl_action(a, &plus) - pl_action(a, &minus)) / (plus[k][c] - minus[k][c]);
            }
        }
        let mut trial = knots.to_vec();
        let mut moved = false;
        while step > 1e-14 {
            for k in 1..n - 1 {
                trial[k][0] = (knots[k][0] - step * grad[k][0]).max(0.0);
                trial[k][1] = knots[k][1] - step * grad[k][1];
            }
            let v = pl_action(a, &trial);
            if v < value {
                value = v;
                knots.copy_from_slice(&trial);
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    value
}

/// Minimal action over `segments`-step paths: every contiguous boundary
/// block and the chord, then projected descent from the best of them.
fn brute_force_action(a: f64, x: [f64; 2], y: [f64; 2], segments: usize) -> (f64, Vec<[f64; 2]>) {
    let mut best: Vec<[f64; 2]> = (0..=segments)
        .map(|k| {
            let s = k as f64 / segments as f64;
            [x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])]
        })
        .collect();
    let mut best_value = pl_action(a, &best);
    for j in 0..=segments {
        for b in 0..=segments - j {
            let r = segments - j - b;
            if (j == 0 && x[0] > 0.0) || (r == 0 && y[0] > 0.0) {
                continue;
            }
            let knots = labelled_path(a, x, y, (j, b, r));
            let v = pl_action(a, &knots);
            if v < best_value {
                best_value = v;
                best = knots;
            }
        }
    }
    let value = polish(a, &mut best);
    (value, best)
}

#[test]
fn c01_cost_against_brute_force_paths() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut results = Vec::new();
    let mut undercut = 0;
    let mut worst_consistency = 0.0f64;
    for _ in 0..50 {
        let a = rng.random_range(1.05..8.0);
        let params = Params::new(a, 1.0, 2).unwrap();
        let (x, y) = (random_point(&mut rng), random_point(&mut rng));
        let (xa, ya) = ([x.x1, x.xp[0]], [y.x1, y.xp[0]]);
        let (value, knots) = brute_force_action(a, xa, ya, 64);
        // convergence indicator: change against the 32-step minimiser
        let (coarse, _) = brute_force_action(a, xa, ya, 32);
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let path = PlPath::new(times, knots.iter().map(|k| p(k[0], k[1])).collect()).unwrap();
        let library: f64 = action(&params, &path).unwrap().finite().unwrap();
        worst_consistency = worst_consistency.max((library - value).abs() / value.max(1.0));
        let c = cost(&params, &x, &y);
        if value < c * (1.0 - 1e-12) - 1e-15 {
            undercut += 1;
        }
        results.push((
            (coarse - value).abs() / value.max(1e-300),
            (value - c) / c.max(1e-300),
        ));
    }
    results.sort_by(|u, v| u.0.total_cmp(&v.0));
    let worst_best = results
        .iter()
        .take(20)
        .map(|r| r.1.abs())
        .fold(0.0, f64::max);
    let pass = undercut == 0
        && worst_best <= 2e-3
        && worst_consistency < 1e-9
        && start.elapsed().as_secs() <= 300;
    report(
        1,
        "closed-form cost vs 64-knot brute force",
        pass,
        format!(
            "undercuts {undercut}, worst relative gap on 20 best-converged {worst_best:.2e}, action consistency {worst_consistency:.1e}, {:.1?}",
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn c02_sticky_rate_against_golden_section() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst, mut branches) = (0.0f64, [0usize; 2]);
    for _ in 0..10_000 {
        let params = Params::new(rng.random_range(1.01..10.0), 1.0, 2).unwrap();
        let (x, y) = (random_point(&mut rng), random_point(&mut rng));
        let closed = sticky_rate(&params, &x, &y);
        let n = x.x1 + y.x1;
        let s = x.tangential_distance(&y);
        branches[usize::from(s * (params.a - 1.0).sqrt() > n)] += 1;
        let (_, numeric) =
            golden_section_min(|l| sticky_rate_profile(&params, &x, &y, l), 0.0, 1.0, 1e-13);
        worst = worst.max(
            (numeric.min(sticky_rate_profile(&params, &x, &y, 0.0)) - closed).abs()
                / closed.max(1.0),
        );
    }
    let pass =
        worst <= 1e-10 && branches.iter().all(|b| *b > 1000) && start.elapsed().as_secs() <= 10;
    report(
        2,
        "sticky rate vs golden-section minimisation",
        pass,
        format!(
            "max error {worst:.2e}, branch counts {branches:?}, {:.1?}",
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 3

fn total_mass(params: &Params, spec: &QuadratureSpec, t: f64, x: &Point) -> f64 {
    let outer = QuadratureSpec::new(1e-9, 30, true).unwrap();
    let r1 = x.x1 + 9.0 * t.sqrt();
    let r2 = 9.0 * (params.a.max(1.0) * t).sqrt();
    let c2 = x.xp[0];
    let interior = integrate(
        |y1| {
            integrate(
                |y2| {
                    transition_kernel(params, spec, t, x, &p(y1, y2))
                        .unwrap()
                        .interior_density
                },
                c2 - r2,
                c2 + r2,
                &outer,
            )
            .unwrap()
            .value
        },
        0.0,
        r1,
        &outer,
    )
    .unwrap()
    .value;
    let boundary = integrate(
        |y2| {
            transition_kernel(params, spec, t, x, &p(0.0, y2))
                .unwrap()
                .boundary_density
        },
        c2 - r2,
        c2 + r2,
        &outer,
    )
    .unwrap()
    .value;
    interior + boundary
}

#[test]
fn c03_normalisation_and_symmetry() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::new(1e-10, 30, true).unwrap();
    let targets = [p(0.0, 0.7), p(0.4, -0.5), p(1.3, 1.1)];
    let mut worst_mass = 0.0f64;
    let mut worst_sym = 0.0f64;
    let cases: Vec<(f64, f64, f64, f64)> = [0.5, 2.0, 4.0]
        .iter()
        .flat_map(|a| {
            [0.3, 1.0, 3.0].iter().flat_map(move |th| {
                [0.1, 0.5, 2.0]
                    .iter()
                    .flat_map(move |t| [0.0, 0.3, 1.0].map(|x1| (*a, *th, *t, x1)))
            })
        })
        .collect();
    use rayon::prelude::*;
    let out: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(a, theta, t, x1)| {
            let params = Params::new(a, theta, 2).unwrap();
            let x = p(x1, 0.0);
            let mass = total_mass(&params, &spec, t, &x);
            let sym = targets
                .iter()
                .map(|y| {
                    let fwd = transition_kernel(&params, &spec, t, &x, y)
                        .unwrap()
                        .mu_density(&params, y);
                    let bwd = transition_kernel(&params, &spec, t, y, &x)
                        .unwrap()
                        .mu_density(&params, &x);
                    (fwd - bwd).abs() / fwd.abs().max(bwd.abs())
                })
                .fold(0.0, f64::max);
            ((mass - 1.0).abs(), sym)
        })
        .collect();
    for (m, s) in out {
        worst_mass = worst_mass.max(m);
        worst_sym = worst_sym.max(s);
    }
    let pass = worst_mass <= 1e-7 && worst_sym <= 1e-8 && start.elapsed().as_secs() <= 120;
    report(
        3,
        "kernel normalisation and mu-symmetry on 81 cases",
        pass,
        format!(
            "max |mass - 1| {worst_mass:.2e}, max symmetry error {worst_sym:.2e}, {:.1?}",
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn c04_chapman_kolmogorov() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::new(1e-10, 30, true).unwrap();
    let params = Params::new(2.0, 1.0, 2).unwrap();
    let x = p(0.0, 0.0);
    let grid = CkGrid::new(8.0, 8.0, 200, 400).unwrap();
    let r = chapman_kolmogorov_residual(&params, &spec, 0.5, 0.5, &x, &x, &grid).unwrap();
    let coarse = (r.direct - r.coarse_composed).abs();
    let order = (coarse / r.residual).log2();
    let pass = r.residual <= 1e-4 && order >= 1.0;
    report(
        4,
        "Chapman-Kolmogorov residual and order",
        pass,
        format!(
            "residual {:.2e}, coarse {coarse:.2e}, order {order:.2}, {:.1?}",
            r.residual,
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn c05_fokker_planck_order() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::new(1e-12, 30, true).unwrap();
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let mut slopes = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        let params = Params::new(a, 1.0, 2).unwrap();
        let x = p(0.0, 0.0);
        let res: Vec<_> = hs
            .iter()
            .map(|h| {
                fokker_planck_residual(&params, &spec, 0.5, &x, FdSteps { dt: *h, dh: *h }).unwrap()
            })
            .collect();
        let rows: Vec<Vec<f64>> = hs.iter().map(|h| vec![1.0, h.ln()]).collect();
        for pick in [
            |r: &sticky_core::kernel::FpResidual| r.interior,
            |r: &sticky_core::kernel::FpResidual| r.boundary,
            |r: &sticky_core::kernel::FpResidual| r.trace,
        ] {
            let logs: Vec<f64> = res.iter().map(|r| pick(r).ln()).collect();
            slopes.push((a, least_squares(&rows, &logs).unwrap()[1]));
        }
    }
    let pass = slopes.iter().all(|(_, s)| (1.6..=2.4).contains(s));
    let shown: Vec<String> = slopes
        .iter()
        .map(|(a, s)| format!("a={a}:{s:.2}"))
        .collect();
    report(
        5,
        "Fokker-Planck residual order (interior, boundary, trace)",
        pass,
        format!("slopes [{}], {:.1?}", shown.join(" "), start.elapsed()),
    );
}

// ---------------------------------------------------------------- criterion 6

/// CDF on a fine grid by cumulative Gauss-Kronrod integration of a density.
fn tabulated_cdf(
    density: impl Fn(f64) -> f64 + Sync,
    lo: f64,
    hi: f64,
    cells: usize,
) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let spec = QuadratureSpec::new(1e-9, 30, true).unwrap();
    let h = (hi - lo) / cells as f64;
    let pieces: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|k| {
            integrate(&density, lo + k as f64 * h, lo + (k + 1) as f64 * h, &spec)
                .unwrap()
                .value
        })
        .collect();
    let mut cum = vec![0.0];
    for piece in pieces {
        cum.push(cum.last().unwrap() + piece);
    }
    ((0..=cells).map(|k| lo + k as f64 * h).collect(), cum)
}

fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= nodes[0] {
        return values[0];
    }
    let k = nodes.partition_point(|n| *n <= x).min(nodes.len() - 1);
    let (x0, x1) = (nodes[k - 1], nodes[k]);
    values[k - 1] + (values[k] - values[k - 1]) * ((x - x0) / (x1 - x0)).clamp(0.0, 1.0)
}

#[test]
fn c06_simulator_exactness() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::new(1e-10, 30, true).unwrap();
    let params = Params::new(2.0, 1.0, 2).unwrap();
    let x = p(0.3, 0.0);
    let (delta, steps, n) = (0.5, 2, 100_000);
    let config = SimConfig::new(params, x.clone(), delta / steps as f64, steps, 606, 512).unwrap();
    let sim = Simulator::new(params, 512).unwrap();
    let ends = sim.endpoints(&config, n).unwrap();
    let masses = component_masses(&params, &spec, delta, x.x1).unwrap();
    let hits = ends.iter().filter(|e| e.0.on_boundary()).count();
    let freq = hits as f64 / n as f64;
    let se = (masses.boundary_atom * (1.0 - masses.boundary_atom) / n as f64).sqrt();
    let atom_ok = (freq - masses.boundary_atom).abs() <= 3.0 * se;
    // normal coordinate of interior endpoints
    let r2 = 10.0 * (params.a * delta).sqrt();
    let marginal = |y1: f64| {
        integrate(
            |y2| {
                transition_kernel(&params, &spec, delta, &x, &p(y1, y2))
                    .unwrap()
                    .interior_density
            },
            -r2,
            r2,
            &spec,
        )
        .unwrap()
        .value
    };
    let (nodes, cum) = tabulated_cdf(marginal, 0.0, x.x1 + 8.0 * delta.sqrt(), 400);
    let total = *cum.last().unwrap();
    let mut normals: Vec<f64> = ends
        .iter()
        .filter(|e| !e.0.on_boundary())
        .map(|e| e.0.x1)
        .collect();
    let m = normals.len();
    let ks_normal = ks_statistic(&mut normals, |v| interpolate(&nodes, &cum, v) / total);
    // tangential coordinate of all endpoints
    let r1 = x.x1 + 10.0 * delta.sqrt();
    let tangential = |y2: f64| {
        let bulk = integrate(
            |y1| {
                transition_kernel(&params, &spec, delta, &x, &p(y1, y2))
                    .unwrap()
                    .interior_density
            },
            0.0,
            r1,
            &spec,
        )
        .unwrap()
        .value;
        bulk + transition_kernel(&params, &spec, delta, &x, &p(0.0, y2))
            .unwrap()
            .boundary_density
    };
    let (tnodes, tcum) = tabulated_cdf(tangential, -r2, r2, 400);
    let ttotal = *tcum.last().unwrap();
    let mut tang: Vec<f64> = ends.iter().map(|e| e.0.xp[0]).collect();
    let ks_tangential = ks_statistic(&mut tang, |v| interpolate(&tnodes, &tcum, v) / ttotal);
    // L = θ O along stored paths
    let exact_local_time = (0..200).all(|k| {
        let path = sim.simulate_path(&config, k).unwrap();
        path.local_time
            .iter()
            .zip(&path.occupation_time)
            .all(|(l, o)| *l == params.theta * o)
    });
    let pass = ks_normal < ks_critical_1pct(m)
        && ks_tangential < ks_critical_1pct(n)
        && atom_ok
        && exact_local_time
        && start.elapsed().as_secs() <= 180;
    report(
        6,
        "simulator exactness",
        pass,
        format!(
            "KS normal {ks_normal:.2e} (crit {:.2e}), KS tangential {ks_tangential:.2e} (crit {:.2e}), atom {freq:.4} vs {:.4} (3se {:.1e}), L=θO {exact_local_time}, {:.1?}",
            ks_critical_1pct(m),
            ks_critical_1pct(n),
            masses.boundary_atom,
            3.0 * se,
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn c07_static_ldp_slopes() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (a, expected) in [(4.0, 0.45125), (0.5, 1.805)] {
        let params = Params::new(a, 1.0, 2).unwrap();
        let target = TargetSet::boundary_patch(vec![2.0], 0.1).unwrap();
        let exp = StaticExperiment::new(
            params,
            p(0.0, 0.0),
            target,
            vec![0.2, 0.1, 0.05, 0.025],
            Method::Quadrature,
        )
        .unwrap();
        let est = static_ldp(&exp, &spec).unwrap();
        let rel = (est.extrapolated_rate - expected).abs() / expected;
        pass &= (est.reference_rate - expected).abs() < 1e-9 && rel <= 0.10;
        parts.push(format!(
            "a={a}: {:.4} vs {expected} ({:.1}%)",
            est.extrapolated_rate,
            100.0 * rel
        ));
    }
    pass &= start.elapsed().as_secs() <= 300;
    report(
        7,
        "static LDP extrapolated rates",
        pass,
        format!("{}, {:.1?}", parts.join("; "), start.elapsed()),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn c08_phase_transition() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let grid = [0.5, 0.75, 1.0, 1.5, 2.0, 2.25, 2.5, 2.75, 3.0, 3.5];
    let params: Vec<Params> = grid
        .iter()
        .map(|a| Params::new(*a, 1.0, 2).unwrap())
        .collect();
    let scan = phase_transition_scan(
        &params,
        &p(1.0, 0.0),
        &p(1.0, 5.0),
        0.1,
        &[0.2, 0.1, 0.05, 0.025],
        &spec,
    )
    .unwrap();
    let flat: Vec<f64> = scan
        .rows
        .iter()
        .filter(|r| r.a <= 1.0)
        .map(|r| r.extrapolated_rate)
        .collect();
    let level = flat.iter().sum::<f64>() / flat.len() as f64;
    let flat_ok = flat.iter().all(|r| (r / level - 1.0).abs() <= 0.03);
    let a_star = scan.crossing.unwrap();
    let past: Vec<f64> = scan
        .rows
        .iter()
        .filter(|r| r.a > a_star)
        .map(|r| r.extrapolated_rate)
        .collect();
    let decreasing = past.windows(2).all(|w| w[1] < w[0]);
    let kink_ok = scan.kink.is_some_and(|k| (k - a_star).abs() <= 0.2);
    let rates: Vec<String> = scan
        .rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.a, r.extrapolated_rate))
        .collect();
    report(
        8,
        "phase transition in a",
        flat_ok && decreasing && kink_ok,
        format!(
            "a* {a_star:.4}, kink {:?}, rates [{}], {:.1?}",
            scan.kink,
            rates.join(" "),
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn c09_path_slicing() {
    let _serial = serial();
    let start = Instant::now();
    let params = Params::new(4.0, 1.0, 2).unwrap();
    let x = p(0.0, 0.0);
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let chain: Vec<Point> = times.iter().map(|t| p(0.0, 2.0 * t)).collect();
    let sliced = sticky_core::geometry::discrete_cost(&params, &times, &chain).unwrap();
    let additive = (sliced - cost(&params, &x, &p(0.0, 2.0))).abs() <= 1e-12;
    // low stickiness keeps the sub-exponential corrections small at ε ≥ 0.05
    let sticky = Params::new(4.0, 0.1, 2).unwrap();
    let r = 0.5;
    let waypoints = vec![
        (0.5, TargetSet::ball(p(0.0, 1.0), r).unwrap()),
        (1.0, TargetSet::ball(p(0.0, 2.0), r).unwrap()),
    ];
    let (reference, _) = sliced_reference_rate(&sticky, &x, &waypoints).unwrap();
    let est = sliced_ldp(&sticky, &x, &waypoints, &[0.2, 0.1, 0.05], 100_000, 909).unwrap();
    let rel = (est.extrapolated_rate - reference).abs() / reference;
    let pass = additive
        && (reference - (2.0 - r).powi(2) / 8.0).abs() < 1e-9
        && rel <= 0.2
        && est.dropped.is_empty();
    report(
        9,
        "path slicing along the boundary geodesic",
        pass,
        format!(
            "sliced-vs-cost error {:.1e}, MC rate {:.4} vs {reference:.4} ({:.1}%), probabilities {:?}, {:.1?}",
            (sliced - 0.5).abs(),
            est.extrapolated_rate,
            100.0 * rel,
            est.probabilities,
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 10

/// Minimum of `Σ c_ij π_ij` over every vertex of the transportation polytope,
/// found by enumerating spanning-tree bases.
fn brute_force_lp(c: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(size);
    fn recurse(
        start: usize,
        chosen: &mut Vec<usize>,
        size: usize,
        cells: &[(usize, usize)],
        eval: &mut dyn FnMut(&[usize]),
    ) {
        if chosen.len() == size {
            eval(chosen);
            return;
        }
        for k in start..cells.len() {
            if cells.len() - k < size - chosen.len() {
                break;
            }
            chosen.push(k);
            recurse(k + 1, chosen, size, cells, eval);
            chosen.pop();
        }
    }
    let mut eval = |basis: &[usize]| {
        // peel leaves of the bipartite basis graph to get the unique flows
        let mut flow = vec![0.0; basis.len()];
        let mut done = vec![false; basis.len()];
        let (mut rows, mut cols) = (a.to_vec(), b.to_vec());
        for _ in 0..basis.len() {
            let mut progressed = false;
            for (slot, &k) in basis.iter().enumerate() {
                if done[slot] {
                    continue;
                }
                let (i, j) = cells[k];
                let row_deg = basis
                    .iter()
                    .enumerate()
                    .filter(|(s, &q)| !done[*s] && cells[q].0 == i)
                    .count();
                let col_deg = basis
                    .iter()
                    .enumerate()
                    .filter(|(s, &q)| !done[*s] && cells[q].1 == j)
                    .count();
                if row_deg == 1 || col_deg == 1 {
                    let v = if row_deg == 1 { rows[i] } else { cols[j] };
                    flow[slot] = v;
                    rows[i] -= v;
                    cols[j] -= v;
                    done[slot] = true;
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                return; // contains a cycle: not a basis
            }
        }
        if rows.iter().chain(&cols).any(|r| r.abs() > 1e-12) || flow.iter().any(|f| *f < -1e-12) {
            return;
        }
        let v: f64 = basis
            .iter()
            .zip(&flow)
            .map(|(&k, f)| c[cells[k].0][cells[k].1] * f)
            .sum();
        if v < best {
            best = v;
        }
    };
    recurse(0, &mut chosen, size, &cells, &mut eval);
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

#[test]
fn c10_gamma_trend_and_exact_solver() {
    let _serial = serial();
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let params = Params::new(4.0, 1.0, 2).unwrap();
    let mu0 = DiscreteMeasure::uniform((0..8).map(|k| p(0.0, k as f64)).collect()).unwrap();
    let mu1 = DiscreteMeasure::uniform((0..8).map(|k| p(0.0, k as f64 + 1.0)).collect()).unwrap();
    let g = gamma_limit_experiment(
        &params,
        &spec,
        &mu0,
        &mu1,
        &[0.04, 0.02, 0.01],
        100_000,
        1e-10,
    )
    .unwrap();
    let gap = |eps: f64| g.rows.iter().find(|r| r.epsilon == eps).map(|r| r.gap);
    let ratio = match (gap(0.04), gap(0.01)) {
        (Some(a), Some(b)) => a / b,
        _ => 0.0,
    };
    let off = g.rows.last().map_or(1.0, |r| r.off_support_mass);
    // exact solver against enumeration on every shape up to 5 x 5
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst = 0.0f64;
    let mut instances = 0;
    for m in 1..=5 {
        for n in 1..=5 {
            for uniform in [true, false] {
                if uniform && m != n {
                    continue;
                }
                let params = Params::new(rng.random_range(1.05..8.0), 1.0, 2).unwrap();
                let src: Vec<Point> = (0..m).map(|_| random_point(&mut rng)).collect();
                let dst: Vec<Point> = (0..n).map(|_| random_point(&mut rng)).collect();
                let (mu0, mu1) = if uniform {
                    (
                        DiscreteMeasure::uniform(src).unwrap(),
                        DiscreteMeasure::uniform(dst).unwrap(),
                    )
                } else {
                    let (wa, wb) = (random_weights(&mut rng, m), random_weights(&mut rng, n));
                    (
                        DiscreteMeasure::new(src, wa).unwrap(),
                        DiscreteMeasure::new(dst, wb).unwrap(),
                    )
                };
                let c: Vec<Vec<f64>> = mu0
                    .atoms()
                    .iter()
                    .map(|x| mu1.atoms().iter().map(|y| cost(&params, x, y)).collect())
                    .collect();
                let oracle = if uniform {
                    permutations(m)
                        .iter()
                        .map(|s| {
                            s.iter().enumerate().map(|(i, j)| c[i][*j]).sum::<f64>() / m as f64
                        })
                        .fold(f64::INFINITY, f64::min)
                } else {
                    brute_force_lp(&c, mu0.weights(), mu1.weights())
                };
                let solved = kantorovich(&params, &mu0, &mu1).unwrap().cost_value;
                worst = worst.max((solved - oracle).abs() / oracle.max(1e-300).max(1.0));
                instances += 1;
            }
        }
    }
    let pass = ratio >= 2.0 && off <= 0.1 && worst <= 1e-12;
    report(
        10,
        "Gamma-trend of the entropic cost and exact transport solver",
        pass,
        format!(
            "gap ratio {ratio:.2} (gaps {:?}), off-support mass {off:.1e}, LP worst error {worst:.1e} over {instances} instances, {:.1?}",
            g.rows.iter().map(|r| r.gap).collect::<Vec<_>>(),
            start.elapsed()
        ),
    );
}

// ---------------------------------------------------------------- criterion 11

#[test]
fn c11_triangle_inequality() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let params = Params::new(rng.random_range(0.2..10.0), 1.0, 2).unwrap();
        let (x, y, z) = (
            random_point(&mut rng),
            random_point(&mut rng),
            random_point(&mut rng),
        );
        let violation =
            distance(&params, &x, &z) - distance(&params, &x, &y) - distance(&params, &y, &z);
        worst = worst.max(violation);
    }
    report(
        11,
        "triangle inequality for the intrinsic distance",
        worst <= 1e-12,
        format!("largest violation {worst:.2e}, {:.1?}", start.elapsed()),
    );
}
