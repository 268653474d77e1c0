//! Log-domain Sinkhorn scaling.

use rayon::prelude::*;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::log_add;

/// Iterations between absorptions of the scaling vectors into the kernel.
const ABSORB_EVERY: usize = 50;

pub(crate) struct Scaling {
    /// `log π_ij`.
    pub log_plan: Vec<Vec<f64>>,
    /// Accumulated potentials with `log π_ij = f_i + g_j + log K_ij`.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub iterations: usize,
}

fn log_sum(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, log_add)
}

/// Scales `exp(log_k)` to the marginals `a` (rows) and `b` (columns).
pub(crate) fn sinkhorn(
    log_k: &[Vec<f64>],
    a: &[f64],
    b: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Scaling> {
    let (m, n) = (a.len(), b.len());
    let (log_a, log_b): (Vec<f64>, Vec<f64>) = (
        a.iter().map(|w| w.ln()).collect(),
        b.iter().map(|w| w.ln()).collect(),
    );
    let mut work: Vec<Vec<f64>> = log_k.to_vec();
    let (mut f, mut g) = (vec![0.0; m], vec![0.0; n]);
    let mut v = vec![0.0; n];
    let mut error = f64::INFINITY;
    let mut last_block = f64::INFINITY;
    for it in 1..=max_iter {
        let u: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| log_a[i] - log_sum(work[i].iter().zip(&v).map(|(k, vj)| k + vj)))
            .collect();
        v = (0..n)
            .into_par_iter()
            .map(|j| log_b[j] - log_sum((0..m).map(|i| work[i][j] + u[i])))
            .collect();
        // columns are exact after the v-update; the row error decides convergence
        error = (0..m)
            .into_par_iter()
            .map(|i| {
                (log_sum(work[i].iter().zip(&v).map(|(k, vj)| k + vj + u[i])).exp() - a[i]).abs()
            })
            .reduce(|| 0.0, f64::max);
        let done = error < tol;
        if done || it % ABSORB_EVERY == 0 {
            work.par_iter_mut().enumerate().for_each(|(i, row)| {
                for (k, vj) in row.iter_mut().zip(&v) {
                    *k += u[i] + vj;
                }
            });
            for (fi, ui) in f.iter_mut().zip(&u) {
                *fi += ui;
            }
            for (gj, vj) in g.iter_mut().zip(&mut v) {
                *gj += *vj;
                *vj = 0.0;
            }
            // slow scaling modes between weakly coupled blocks: take a damped Newton step on the dual
            if !done && error > 0.5 * last_block {
                newton_step(&mut work, &mut f, &mut g, a, b);
            }
            last_block = error;
        }
        if done {
            return Ok(Scaling {
                log_plan: work,
                f,
                g,
                iterations: it,
            });
        }
        if !error.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        marginal_error: error,
    })
}

/// Dual objective `Σ a_i δu_i + Σ b_j δv_j − Σ π_ij e^{δu_i + δv_j}`.
fn dual_objective(plan: &[Vec<f64>], a: &[f64], b: &[f64], du: &[f64], dv: &[f64]) -> f64 {
    let linear: f64 = a.iter().zip(du).map(|(w, d)| w * d).sum::<f64>()
        + b.iter().zip(dv).map(|(w, d)| w * d).sum::<f64>();
    let mass: f64 = plan
        .par_iter()
        .zip(du)
        .map(|(row, di)| {
            row.iter()
                .zip(dv)
                .map(|(p, dj)| p * (di + dj).exp())
                .sum::<f64>()
        })
        .sum();
    linear - mass
}

/// One Newton step on the dual potentials with backtracking, folded into `work`.
fn newton_step(work: &mut [Vec<f64>], f: &mut [f64], g: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    if n < 2 {
        return;
    }
    let plan: Vec<Vec<f64>> = work
        .iter()
        .map(|r| r.iter().map(|l| l.exp()).collect())
        .collect();
    // unknowns (δu, δv_0..δv_{n-2}); δv_{n-1} = 0 removes the constant shift
    let size = m + n - 1;
    let mut jac = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for i in 0..m {
        let row: f64 = plan[i].iter().sum();
        jac[(i, i)] = row;
        rhs[i] = a[i] - row;
        for j in 0..n - 1 {
            jac[(i, m + j)] = plan[i][j];
            jac[(m + j, i)] = plan[i][j];
        }
    }
    for j in 0..n - 1 {
        let col: f64 = plan.iter().map(|r| r[j]).sum();
        jac[(m + j, m + j)] = col;
        rhs[m + j] = b[j] - col;
    }
    let Some(step) = jac.lu().solve(&rhs) else {
        return;
    };
    let du: Vec<f64> = (0..m).map(|i| step[i]).collect();
    let mut dv: Vec<f64> = (0..n - 1).map(|j| step[m + j]).collect();
    dv.push(0.0);
    let base = dual_objective(&plan, a, b, &vec![0.0; m], &vec![0.0; n]);
    let mut alpha = 1.0;
    while alpha > 1e-6 {
        let (su, sv): (Vec<f64>, Vec<f64>) = (
            du.iter().map(|d| alpha * d).collect(),
            dv.iter().map(|d| alpha * d).collect(),
        );
        if dual_objective(&plan, a, b, &su, &sv) > base {
            for (i, row) in work.iter_mut().enumerate() {
                for (k, dj) in row.iter_mut().zip(&sv) {
                    *k += su[i] + dj;
                }
            }
            f.iter_mut().zip(&su).for_each(|(x, d)| *x += d);
            g.iter_mut().zip(&sv).for_each(|(x, d)| *x += d);
            return;
        }
        alpha *= 0.5;
    }
}
