//! Discrete optimal transport for the intrinsic cost, its entropic
//! regularisation against the kernel, and the small-ε limit between them.

mod entropic;
mod exact;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{cost, geodesic, HalfSpacePoint, ModelParams};
use crate::kernel::{log_add, log_mu_density};
use crate::quadrature::QuadratureSpec;
use crate::stats::least_squares;

type Params = ModelParams<f64>;
type Point = HalfSpacePoint<f64>;

/// Largest number of atoms per side accepted by the solvers.
pub const MAX_ATOMS: usize = 512;

/// Finitely supported probability measure on the closed half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(param(
                "need as many positive weights as atoms, and at least one",
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(param("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(param(format!("weights sum to {total}, not 1")));
        }
        let d = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if atoms.iter().any(|p| !(p.x1 >= 0.0)) {
            return Err(param("atoms must lie in the closed half-space"));
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn uniform(atoms: Vec<Point>) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        let n = atoms.len();
        Self::new(atoms, vec![w; n])
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= 1e-15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    /// `matrix[i][j]`: mass sent from source atom `i` to target atom `j`.
    pub matrix: Vec<Vec<f64>>,
    pub cost_value: f64,
    pub dual_potentials: Option<DualPotentials>,
    pub iterations: usize,
    pub marginal_error: f64,
    /// `log Σ K_ij` of the Gibbs matrix, for entropic plans.
    pub log_normaliser: Option<f64>,
}

impl TransportPlan {
    /// Largest deviation of the row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        marginal_error(&self.matrix, self.source.weights(), self.target.weights())
    }

    /// `Σ π_ij c(x_i, y_j)`.
    pub fn transport_cost(&self, params: &Params) -> f64 {
        let c = cost_matrix(params, &self.source, &self.target);
        self.matrix
            .iter()
            .zip(&c)
            .map(|(p, c)| p.iter().zip(c).map(|(p, c)| p * c).sum::<f64>())
            .sum()
    }
}

fn marginal_error(matrix: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    let rows = matrix
        .iter()
        .zip(a)
        .map(|(r, w)| (r.iter().sum::<f64>() - w).abs());
    let cols = b
        .iter()
        .enumerate()
        .map(|(j, w)| (matrix.iter().map(|r| r[j]).sum::<f64>() - w).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

fn check_pair(params: &Params, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<()> {
    params.check_dim(mu0.dim())?;
    params.check_dim(mu1.dim())?;
    if mu0.len() > MAX_ATOMS || mu1.len() > MAX_ATOMS {
        return Err(param(format!("at most {MAX_ATOMS} atoms per measure")));
    }
    Ok(())
}

/// `C_ij = c(x_i, y_j)`, assembled in parallel over rows.
pub fn cost_matrix(params: &Params, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Vec<Vec<f64>> {
    mu0.atoms
        .par_iter()
        .map(|x| mu1.atoms.iter().map(|y| cost(params, x, y)).collect())
        .collect()
}

/// Exact optimal plan for the intrinsic cost.
pub fn kantorovich(
    params: &Params,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
) -> Result<TransportPlan> {
    check_pair(params, mu0, mu1)?;
    let c = cost_matrix(params, mu0, mu1);
    let (m, n) = (mu0.len(), mu1.len());
    let (matrix, u, v, iterations) = if m == n && mu0.is_uniform() && mu1.is_uniform() {
        let (assignment, u, v) = exact::hungarian(&c);
        let w = 1.0 / n as f64;
        let mut matrix = vec![vec![0.0; n]; n];
        for (i, j) in assignment.into_iter().enumerate() {
            matrix[i][j] = w;
        }
        // the assignment duals scale with the common weight
        (matrix, u, v, n)
    } else {
        let s = exact::transportation_simplex(&c, mu0.weights(), mu1.weights());
        (s.flow, s.u, s.v, s.pivots)
    };
    let cost_value = matrix
        .iter()
        .zip(&c)
        .map(|(p, c)| p.iter().zip(c).map(|(p, c)| p * c).sum::<f64>())
        .sum();
    let marginal_error = marginal_error(&matrix, mu0.weights(), mu1.weights());
    Ok(TransportPlan {
        source: mu0.clone(),
        target: mu1.clone(),
        matrix,
        cost_value,
        dual_potentials: Some(DualPotentials {
            source: u,
            target: v,
        }),
        iterations,
        marginal_error,
        log_normaliser: None,
    })
}

/// Entropic plan minimising `ε H(π | K)` over couplings, `K_ij` the kernel at
/// time `ε` against `μ`.
///
/// `cost_value` is `ε Σ π_ij log(π_ij / K_ij)`; with `K̃ = K / Z` normalised
/// over the atom grid this is `ε H(π | K̃) − ε log Z`, and `log Z` is reported
/// as `log_normaliser`.
pub fn schrodinger(
    params: &Params,
    spec: &QuadratureSpec,
    epsilon: f64,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    check_pair(params, mu0, mu1)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(param("epsilon must be positive"));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(param("need tol > 0 and max_iter >= 1"));
    }
    let log_k: Vec<Vec<f64>> = mu0
        .atoms
        .par_iter()
        .map(|x| {
            mu1.atoms
                .iter()
                .map(|y| log_mu_density(params, spec, epsilon, x, y))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let log_z = log_k
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, log_add);
    let normalised: Vec<Vec<f64>> = log_k
        .iter()
        .map(|r| r.iter().map(|k| k - log_z).collect())
        .collect();
    let scaled = entropic::sinkhorn(&normalised, mu0.weights(), mu1.weights(), max_iter, tol)?;
    let matrix: Vec<Vec<f64>> = scaled
        .log_plan
        .iter()
        .map(|r| r.iter().map(|l| l.exp()).collect())
        .collect();
    let relative: f64 = scaled
        .log_plan
        .iter()
        .zip(&normalised)
        .flat_map(|(lp, lk)| {
            lp.iter().zip(lk).map(|(p, k)| {
                if *p == f64::NEG_INFINITY {
                    0.0
                } else {
                    p.exp() * (p - k)
                }
            })
        })
        .sum();
    let marginal_error = marginal_error(&matrix, mu0.weights(), mu1.weights());
    Ok(TransportPlan {
        source: mu0.clone(),
        target: mu1.clone(),
        matrix,
        cost_value: epsilon * (relative - log_z),
        dual_potentials: Some(DualPotentials {
            source: scaled.f.iter().map(|f| epsilon * f).collect(),
            target: scaled.g.iter().map(|g| epsilon * g).collect(),
        }),
        iterations: scaled.iterations,
        marginal_error,
        log_normaliser: Some(log_z),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub epsilon: f64,
    pub entropic_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    pub log_normaliser: f64,
    /// Plan mass outside the support of the exact plan.
    pub off_support_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLimit {
    pub kantorovich_value: f64,
    pub rows: Vec<GammaRow>,
    /// ε values whose Sinkhorn run failed, with the reason.
    pub dropped: Vec<(f64, String)>,
    /// Least-squares `β` in `gap ≈ β ε log(1/ε)`.
    pub beta: f64,
    /// Whether the gap decreases along the decreasing ε sequence.
    pub gap_shrinks: bool,
}

/// Entropic values `C^ε` against the exact value `C` along decreasing ε.
pub fn gamma_limit_experiment(
    params: &Params,
    spec: &QuadratureSpec,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    epsilons: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<GammaLimit> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(param("epsilons must be nonempty and strictly decreasing"));
    }
    if !(epsilons[epsilons.len() - 1] >= 1e-3) {
        return Err(param("smallest epsilon must be at least 1e-3"));
    }
    let exact = kantorovich(params, mu0, mu1)?;
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for eps in epsilons {
        match schrodinger(params, spec, *eps, mu0, mu1, max_iter, tol) {
            Ok(plan) => {
                let off: f64 = plan
                    .matrix
                    .iter()
                    .zip(&exact.matrix)
                    .flat_map(|(p, q)| p.iter().zip(q).filter(|(_, q)| **q <= 0.0).map(|(p, _)| *p))
                    .sum();
                rows.push(GammaRow {
                    epsilon: *eps,
                    entropic_value: plan.cost_value,
                    gap: (plan.cost_value - exact.cost_value).abs(),
                    iterations: plan.iterations,
                    marginal_error: plan.marginal_error,
                    log_normaliser: plan.log_normaliser.unwrap_or(0.0),
                    off_support_mass: off,
                });
            }
            Err(e) if !e.is_validation() => dropped.push((*eps, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Experiment("every epsilon failed".into()));
    }
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.epsilon * (1.0 / r.epsilon).ln()])
        .collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let beta = least_squares(&design, &rhs)?[0];
    let gap_shrinks = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(GammaLimit {
        kantorovich_value: exact.cost_value,
        rows,
        dropped,
        beta,
        gap_shrinks,
    })
}

/// Pushes every plan cell along its geodesic to time `t`.
pub fn displacement_interpolation(
    params: &Params,
    plan: &TransportPlan,
    t: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(param("t must lie in [0, 1]"));
    }
    let mut atoms: Vec<Point> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (i, row) in plan.matrix.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            if *m <= 0.0 {
                continue;
            }
            let z = geodesic(params, &plan.source.atoms[i], &plan.target.atoms[j]).point_at(t);
            match atoms.iter().position(|a| *a == z) {
                Some(k) => weights[k] += m,
                None => {
                    atoms.push(z);
                    weights.push(*m);
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscreteMeasure::new(atoms, weights)
}
