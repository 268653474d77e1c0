//! `sticky`: command-line front end for the sticky-core experiments.
//!
//! Every subcommand prints a JSON summary (or, for `cost`, the bare value) on
//! stdout. With `--out STEM` it also writes `STEM.csv` and `STEM.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sticky_core::geometry::{cost, distance, geodesic};
use sticky_core::kernel::transition_kernel;
use sticky_core::ldp::{
    phase_transition_scan, sliced_ldp, static_ldp, LdpEstimate, Method, StaticExperiment, TargetSet,
};
use sticky_core::quadrature::QuadratureSpec;
use sticky_core::simulator::{simulate_many, SimConfig};
use sticky_core::transport::{
    displacement_interpolation, gamma_limit_experiment, kantorovich, schrodinger, DiscreteMeasure,
    TransportPlan,
};
use sticky_core::{Error, Params, Point};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug, Serialize, Deserialize)]
#[command(
    name = "sticky",
    version,
    about = "Sticky-reflecting Brownian motion on the half-space: costs, kernels, simulation, LDP and transport experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Global {
    /// Seed for every stochastic output.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output stem; writes STEM.csv and STEM.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Maximum bisection depth of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 20)]
    max_subdivisions: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Model {
    /// Boundary diffusivity a > 0.
    #[arg(long)]
    a: f64,
    /// Stickiness θ > 0.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
}

#[derive(Subcommand, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
enum Command {
    /// Intrinsic cost c(x, y).
    Cost {
        #[command(flatten)]
        model: Model,
        /// Start point, normal coordinate first (e.g. 0,0).
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// End point.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Explicit geodesic sampled at uniform times.
    Geodesic {
        #[command(flatten)]
        model: Model,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Number of sample times in [0, 1].
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Kernel p_t(x, ·) on a planar grid plus the boundary line.
    Kernel {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Points per axis.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Half-width of the grid in units of the standard deviation.
        #[arg(long, default_value_t = 6.0)]
        extent: f64,
    },
    /// Exact sample paths on a uniform time grid.
    Simulate {
        #[command(flatten)]
        model: Model,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Nodes of the inverse-CDF tables.
        #[arg(long, default_value_t = 512)]
        resolution: usize,
    },
    /// ε log P(X_ε ∈ E) and the extrapolated rate.
    LdpStatic {
        #[command(flatten)]
        model: Model,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// `ball:X1,X2,...:R` or `patch:X2,...:R`.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Decreasing ε values.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
        /// `quadrature` or `mc`.
        #[arg(long, default_value = "quadrature")]
        method: String,
        /// Paths per ε for Monte Carlo.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Static rates against a ball around y across values of a.
    LdpScan {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, value_delimiter = ',')]
        a_values: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps: Vec<f64>,
    },
    /// Monte Carlo probability of passing through waypoint sets.
    LdpPath {
        #[command(flatten)]
        model: Model,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// `T@SET` with SET as in ldp-static; repeat for every waypoint.
        #[arg(long = "waypoint", required = true, allow_hyphen_values = true)]
        waypoints: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Exact optimal transport plan for the intrinsic cost.
    Ot {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        measures: Measures,
    },
    /// Entropic plan against the kernel at time ε.
    Sinkhorn {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        measures: Measures,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Entropic values against the exact value along decreasing ε.
    GammaLimit {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        measures: Measures,
        #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Displacement interpolation of the exact plan.
    Interpolate {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        measures: Measures,
        /// Interpolation times in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        times: Vec<f64>,
    },
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Measures {
    /// Source measure CSV with header `x1,x2,...,weight`.
    #[arg(long)]
    mu0: PathBuf,
    /// Target measure CSV.
    #[arg(long)]
    mu1: PathBuf,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Tabular output plus the JSON summary of one run.
struct Report {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    summary: Value,
    stdout: Option<String>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_point(s: &str) -> Outcome<Point> {
    let coords: Vec<f64> = s
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad coordinate {c:?} in point {s:?}")))
        })
        .collect::<Outcome<_>>()?;
    if coords.len() < 2 {
        return Err(Failure::Usage(format!(
            "point {s:?} needs at least two coordinates"
        )));
    }
    Ok(Point::from_coords(&coords)?)
}

fn parse_list(s: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad number {c:?}")))
        })
        .collect()
}

fn parse_target(s: &str) -> Outcome<TargetSet> {
    let parts: Vec<&str> = s.split(':').collect();
    let radius = |r: &str| {
        r.parse::<f64>()
            .map_err(|_| Failure::Usage(format!("bad radius {r:?}")))
    };
    match parts.as_slice() {
        ["ball", c, r] => Ok(TargetSet::ball(parse_point(c)?, radius(r)?)?),
        ["patch", c, r] => Ok(TargetSet::boundary_patch(parse_list(c)?, radius(r)?)?),
        _ => Err(Failure::Usage(format!(
            "target {s:?} is not ball:C:R or patch:C:R"
        ))),
    }
}

fn params(model: &Model, d: usize) -> Outcome<Params> {
    Ok(Params::new(model.a, model.theta, d)?)
}

fn read_measure(path: &PathBuf) -> Outcome<DiscreteMeasure> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let values: Vec<f64> = record
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("{}: bad number {v:?}", path.display())))
            })
            .collect::<Outcome<_>>()?;
        let Some((w, coords)) = values.split_last() else {
            continue;
        };
        atoms.push(Point::from_coords(coords)?);
        weights.push(*w);
    }
    Ok(DiscreteMeasure::new(atoms, weights)?)
}

fn estimate_report(est: &LdpEstimate, config: Value) -> Report {
    let header = [
        "epsilon",
        "prob",
        "log_prob",
        "ci_low",
        "ci_high",
        "extrapolated_rate",
        "reference_rate",
    ]
    .map(String::from)
    .to_vec();
    let mut rows: Vec<Vec<String>> = est
        .epsilons
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (lo, hi) = est
                .intervals
                .as_ref()
                .map_or((String::new(), String::new()), |ci| {
                    (num(ci[k].0), num(ci[k].1))
                });
            vec![
                num(*e),
                num(est.probabilities[k]),
                num(est.log_probs[k]),
                lo,
                hi,
                String::new(),
                String::new(),
            ]
        })
        .collect();
    let mut summary_row = vec![String::from("summary")];
    summary_row.extend(std::iter::repeat_n(String::new(), 4));
    summary_row.push(num(est.extrapolated_rate));
    summary_row.push(num(est.reference_rate));
    rows.push(summary_row);
    Report {
        header,
        rows,
        summary: json!({ "config": config, "estimate": est }),
        stdout: None,
    }
}

fn plan_report(plan: &TransportPlan, config: Value, extra: Value) -> Report {
    let header = ["i", "j", "mass"].map(String::from).to_vec();
    let rows = plan
        .matrix
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, m)| **m > 0.0)
                .map(move |(j, m)| vec![i.to_string(), j.to_string(), num(*m)])
        })
        .collect();
    let summary = json!({
        "config": config,
        "value": plan.cost_value,
        "iterations": plan.iterations,
        "marginal_error": plan.marginal_error,
        "log_normaliser": plan.log_normaliser,
        "dual_potentials": plan.dual_potentials,
        "extra": extra,
    });
    Report {
        header,
        rows,
        summary,
        stdout: None,
    }
}

fn run(cli: &Cli) -> Outcome<Report> {
    let g = &cli.global;
    let spec = QuadratureSpec::new(g.rel_tol, g.max_subdivisions, true)?;
    let config = serde_json::to_value(cli).map_err(|e| Failure::Io(e.to_string()))?;
    match &cli.command {
        Command::Cost { model, x, y } => {
            let (x, y) = (parse_point(x)?, parse_point(y)?);
            let params = params(model, x.dim())?;
            params.check_dim(y.dim())?;
            let c = cost(&params, &x, &y);
            let case = geodesic(&params, &x, &y).case;
            let mut header: Vec<String> = (0..x.dim()).map(|k| format!("x{}", k + 1)).collect();
            header.extend((0..y.dim()).map(|k| format!("y{}", k + 1)));
            header.extend(["cost", "distance", "case"].map(String::from));
            let mut row: Vec<String> = x.coords().into_iter().chain(y.coords()).map(num).collect();
            row.extend([
                num(c),
                num(distance(&params, &x, &y)),
                case.as_str().to_string(),
            ]);
            Ok(Report {
                header,
                rows: vec![row],
                summary: json!({ "config": config, "cost": c, "case": case }),
                stdout: Some(format!("{c}")),
            })
        }
        Command::Geodesic {
            model,
            x,
            y,
            samples,
        } => {
            let (x, y) = (parse_point(x)?, parse_point(y)?);
            let params = params(model, x.dim())?;
            params.check_dim(y.dim())?;
            if *samples < 2 {
                return Err(Failure::Usage("samples must be at least 2".into()));
            }
            let geo = geodesic(&params, &x, &y);
            let mut header = vec![String::from("t")];
            header.extend((0..x.dim()).map(|k| format!("x{}", k + 1)));
            let rows = (0..*samples)
                .map(|k| {
                    let t = k as f64 / (*samples - 1) as f64;
                    std::iter::once(num(t))
                        .chain(geo.point_at(t).coords().into_iter().map(num))
                        .collect()
                })
                .collect();
            Ok(Report {
                header,
                rows,
                summary: json!({ "config": config, "geodesic": geo, "breakpoints": geo.breakpoints() }),
                stdout: None,
            })
        }
        Command::Kernel {
            model,
            t,
            x,
            grid,
            extent,
        } => {
            let x = parse_point(x)?;
            if x.dim() != 2 {
                return Err(Failure::Usage(
                    "the kernel grid is planar: x needs two coordinates".into(),
                ));
            }
            let params = params(model, 2)?;
            if *grid < 2 || !(*extent > 0.0) || !(*t > 0.0) {
                return Err(Failure::Usage(
                    "need grid >= 2, extent > 0 and t > 0".into(),
                ));
            }
            let hi1 = x.x1 + extent * t.sqrt();
            let half2 = extent * (params.a.max(1.0) * t).sqrt();
            let n = *grid;
            // normal nodes y₁ = hi·s³ on uniform s; trapezoid weights in s carry the Jacobian
            let hs = 1.0 / (n - 1) as f64;
            let y1s: Vec<f64> = (0..n).map(|k| hi1 * (k as f64 * hs).powi(3)).collect();
            let weights: Vec<f64> = (0..n)
                .map(|k| {
                    let s = k as f64 * hs;
                    let end = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                    end * hs * 3.0 * hi1 * s * s
                })
                .collect();
            let y2s: Vec<f64> = (0..n)
                .map(|k| x.xp[0] - half2 + 2.0 * half2 * k as f64 / (n - 1) as f64)
                .collect();
            let h2 = y2s[1] - y2s[0];
            let trap = |k: usize, h: f64| if k == 0 || k == n - 1 { 0.5 * h } else { h };
            use rayon::prelude::*;
            let interior: Vec<Vec<String>> = y1s
                .par_iter()
                .enumerate()
                .flat_map_iter(|(i, y1)| {
                    let (x, params, spec, weights) = (&x, &params, &spec, &weights);
                    y2s.iter()
                        .enumerate()
                        .map(move |(j, y2)| -> Outcome<Vec<String>> {
                            let y = Point {
                                x1: *y1,
                                xp: vec![*y2],
                            };
                            let k = transition_kernel(params, spec, *t, x, &y)?;
                            Ok(vec![
                                "interior".into(),
                                num(*y1),
                                num(*y2),
                                num(k.interior_density),
                                num(weights[i] * trap(j, h2)),
                            ])
                        })
                })
                .collect::<Outcome<_>>()?;
            let boundary: Vec<Vec<String>> = y2s
                .par_iter()
                .enumerate()
                .map(|(j, y2)| -> Outcome<Vec<String>> {
                    let k = transition_kernel(
                        &params,
                        &spec,
                        *t,
                        &x,
                        &Point {
                            x1: 0.0,
                            xp: vec![*y2],
                        },
                    )?;
                    Ok(vec![
                        "boundary".into(),
                        num(0.0),
                        num(*y2),
                        num(k.boundary_density),
                        num(trap(j, h2)),
                    ])
                })
                .collect::<Outcome<_>>()?;
            let mass: f64 = interior
                .iter()
                .chain(&boundary)
                .map(|r| r[3].parse::<f64>().unwrap_or(0.0) * r[4].parse::<f64>().unwrap_or(0.0))
                .sum();
            let rows = interior.into_iter().chain(boundary).collect();
            Ok(Report {
                header: ["kind", "y1", "y2", "density", "weight"]
                    .map(String::from)
                    .to_vec(),
                rows,
                summary: json!({ "config": config, "trapezoid_mass": mass }),
                stdout: None,
            })
        }
        Command::Simulate {
            model,
            x,
            dt,
            steps,
            paths,
            resolution,
        } => {
            let x = parse_point(x)?;
            let params = params(model, x.dim())?;
            if *paths == 0 {
                return Err(Failure::Usage("paths must be positive".into()));
            }
            let sim = SimConfig::new(params, x.clone(), *dt, *steps, g.seed, *resolution)?;
            let all = simulate_many(&sim, *paths)?;
            let mut header = vec![String::from("path"), String::from("t")];
            header.extend((0..x.dim()).map(|k| format!("x{}", k + 1)));
            header.extend(["local_time", "occupation_time"].map(String::from));
            let mut rows = Vec::new();
            for (k, path) in all.iter().enumerate() {
                for (i, t) in path.times.iter().enumerate() {
                    let mut row = vec![k.to_string(), num(*t)];
                    row.extend(path.states[i].coords().into_iter().map(num));
                    row.extend([num(path.local_time[i]), num(path.occupation_time[i])]);
                    rows.push(row);
                }
            }
            let on_boundary = all
                .iter()
                .filter(|p| p.states.last().is_some_and(Point::on_boundary))
                .count();
            Ok(Report {
                header,
                rows,
                summary: json!({ "config": config, "final_boundary_fraction": on_boundary as f64 / *paths as f64 }),
                stdout: None,
            })
        }
        Command::LdpStatic {
            model,
            x,
            target,
            eps,
            method,
            paths,
        } => {
            let x = parse_point(x)?;
            let params = params(model, x.dim())?;
            let target = parse_target(target)?;
            let method = match method.as_str() {
                "quadrature" => Method::Quadrature,
                "mc" => Method::MonteCarlo {
                    n_paths: *paths,
                    seed: g.seed,
                },
                other => return Err(Failure::Usage(format!("unknown method {other:?}"))),
            };
            let exp = StaticExperiment::new(params, x, target, eps.clone(), method)?;
            Ok(estimate_report(&static_ldp(&exp, &spec)?, config))
        }
        Command::LdpScan {
            theta,
            a_values,
            x,
            y,
            radius,
            eps,
        } => {
            let (x, y) = (parse_point(x)?, parse_point(y)?);
            let list: Vec<Params> = a_values
                .iter()
                .map(|a| Params::new(*a, *theta, x.dim()))
                .collect::<sticky_core::Result<_>>()?;
            let scan = phase_transition_scan(&list, &x, &y, *radius, eps, &spec)?;
            let header = [
                "a",
                "extrapolated_rate",
                "reference_rate",
                "euclidean_rate",
                "beta",
            ]
            .map(String::from)
            .to_vec();
            let rows = scan
                .rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.a),
                        num(r.extrapolated_rate),
                        num(r.reference_rate),
                        num(r.euclidean_rate),
                        num(r.beta),
                    ]
                })
                .collect();
            Ok(Report {
                header,
                rows,
                summary: json!({ "config": config, "scan": scan }),
                stdout: None,
            })
        }
        Command::LdpPath {
            model,
            x,
            waypoints,
            eps,
            paths,
        } => {
            let x = parse_point(x)?;
            let params = params(model, x.dim())?;
            let waypoints: Vec<(f64, TargetSet)> = waypoints
                .iter()
                .map(|w| {
                    let (t, set) = w
                        .split_once('@')
                        .ok_or_else(|| Failure::Usage(format!("waypoint {w:?} is not T@SET")))?;
                    let t = t
                        .parse::<f64>()
                        .map_err(|_| Failure::Usage(format!("bad waypoint time {t:?}")))?;
                    Ok((t, parse_target(set)?))
                })
                .collect::<Outcome<_>>()?;
            Ok(estimate_report(
                &sliced_ldp(&params, &x, &waypoints, eps, *paths, g.seed)?,
                config,
            ))
        }
        Command::Ot { model, measures } => {
            let (mu0, mu1) = (read_measure(&measures.mu0)?, read_measure(&measures.mu1)?);
            let params = params(model, mu0.dim())?;
            let plan = kantorovich(&params, &mu0, &mu1)?;
            Ok(plan_report(&plan, config, Value::Null))
        }
        Command::Sinkhorn {
            model,
            measures,
            epsilon,
            max_iter,
            tol,
        } => {
            let (mu0, mu1) = (read_measure(&measures.mu0)?, read_measure(&measures.mu1)?);
            let params = params(model, mu0.dim())?;
            let plan = schrodinger(&params, &spec, *epsilon, &mu0, &mu1, *max_iter, *tol)?;
            Ok(plan_report(&plan, config, Value::Null))
        }
        Command::GammaLimit {
            model,
            measures,
            eps,
            max_iter,
            tol,
        } => {
            let (mu0, mu1) = (read_measure(&measures.mu0)?, read_measure(&measures.mu1)?);
            let params = params(model, mu0.dim())?;
            let result = gamma_limit_experiment(&params, &spec, &mu0, &mu1, eps, *max_iter, *tol)?;
            let header = [
                "epsilon",
                "entropic_value",
                "kantorovich_value",
                "gap",
                "off_support_mass",
                "iterations",
            ]
            .map(String::from)
            .to_vec();
            let rows = result
                .rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.epsilon),
                        num(r.entropic_value),
                        num(result.kantorovich_value),
                        num(r.gap),
                        num(r.off_support_mass),
                        r.iterations.to_string(),
                    ]
                })
                .collect();
            Ok(Report {
                header,
                rows,
                summary: json!({ "config": config, "result": result }),
                stdout: None,
            })
        }
        Command::Interpolate {
            model,
            measures,
            times,
        } => {
            let (mu0, mu1) = (read_measure(&measures.mu0)?, read_measure(&measures.mu1)?);
            let params = params(model, mu0.dim())?;
            if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Failure::Usage(
                    "interpolation times must lie in [0, 1]".into(),
                ));
            }
            let plan = kantorovich(&params, &mu0, &mu1)?;
            let mut header = vec![String::from("t")];
            header.extend((0..mu0.dim()).map(|k| format!("x{}", k + 1)));
            header.push("weight".into());
            let mut rows = Vec::new();
            for t in times {
                let m = displacement_interpolation(&params, &plan, *t)?;
                for (atom, w) in m.atoms().iter().zip(m.weights()) {
                    let mut row = vec![num(*t)];
                    row.extend(atom.coords().into_iter().map(num));
                    row.push(num(*w));
                    rows.push(row);
                }
            }
            Ok(Report {
                header,
                rows,
                summary: json!({ "config": config, "value": plan.cost_value }),
                stdout: None,
            })
        }
    }
}

fn write_outputs(stem: &Path, report: &Report) -> Outcome<()> {
    let io = |e: &dyn std::fmt::Display| Failure::Io(format!("{}: {e}", stem.display()));
    let mut writer = csv::Writer::from_path(stem.with_extension("csv")).map_err(|e| io(&e))?;
    writer.write_record(&report.header).map_err(|e| io(&e))?;
    for row in &report.rows {
        writer.write_record(row).map_err(|e| io(&e))?;
    }
    writer.flush().map_err(|e| io(&e))?;
    let text = serde_json::to_string_pretty(&report.summary).map_err(|e| io(&e))?;
    fs::write(stem.with_extension("json"), text + "\n").map_err(|e| io(&e))?;
    Ok(())
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let flat = message.replace(['\n', '\r'], " ");
    eprintln!("error kind={kind} code={code} message={flat:?}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(
                "usage",
                EXIT_USAGE,
                e.to_string().lines().next().unwrap_or("invalid arguments"),
            )
        }
    };
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            return fail("usage", EXIT_USAGE, "threads must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail("usage", EXIT_USAGE, &e.to_string());
        }
    }
    let report = match run(&cli) {
        Ok(r) => r,
        Err(Failure::Usage(m)) => return fail("usage", EXIT_USAGE, &m),
        Err(Failure::Numerical(m)) => return fail("numerical", EXIT_NUMERICAL, &m),
        Err(Failure::Io(m)) => return fail("io", EXIT_IO, &m),
    };
    if let Some(stem) = &cli.global.out {
        if let Err(Failure::Io(m) | Failure::Usage(m) | Failure::Numerical(m)) =
            write_outputs(stem, &report)
        {
            return fail("io", EXIT_IO, &m);
        }
    }
    let line = report
        .stdout
        .clone()
        .unwrap_or_else(|| report.summary.to_string());
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").is_err() {
        return fail("io", EXIT_IO, "cannot write to stdout");
    }
    ExitCode::SUCCESS
}
