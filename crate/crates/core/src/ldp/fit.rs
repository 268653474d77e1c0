//! Slope extraction `ε log ρ = -λ + β ε log(1/ε) + γ ε`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::stats::least_squares;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Least-squares fit of `values[i] = ε_i log ρ_i`.
///
/// Three or more points fit all of `(λ, β, γ)`; two points fix `γ = 0`; a
/// single point gives `λ = -ε log ρ`.
pub fn fit_rate(epsilons: &[f64], values: &[f64]) -> Result<RateFit> {
    if epsilons.len() != values.len() || epsilons.is_empty() {
        return Err(param(
            "need matching, nonempty epsilons and log-probabilities",
        ));
    }
    let columns = epsilons.len().min(3);
    let rows: Vec<Vec<f64>> = epsilons
        .iter()
        .map(|e| [1.0, e * (1.0 / e).ln(), *e][..columns].to_vec())
        .collect();
    let beta = least_squares(&rows, values)?;
    Ok(RateFit {
        rate: -beta[0],
        beta: beta.get(1).copied().unwrap_or(0.0),
        gamma: beta.get(2).copied().unwrap_or(0.0),
    })
}
