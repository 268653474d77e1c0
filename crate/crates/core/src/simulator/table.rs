//! Tabulated inverse CDFs of the local-time marginals of one step.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// CDF on a grid of `[0, 1]`, exact at the nodes and log-linear in the density within cells.
#[derive(Clone, Debug)]
pub(crate) struct CdfTable {
    nodes: Vec<f64>,
    /// Unnormalised cumulative masses at the nodes.
    cumulative: Vec<f64>,
    /// Log-density slope within each cell, zero where it is not finite.
    slopes: Vec<f64>,
    /// `log` of the total mass.
    pub log_mass: f64,
}

/// `resolution + 1` nodes on `[0, 1]`: half uniform, a quarter graded
/// geometrically towards each endpoint down to the given layer widths.
pub(crate) fn graded_nodes(resolution: usize, left_layer: f64, right_layer: f64) -> Vec<f64> {
    let graded = resolution / 4;
    let mut nodes: Vec<f64> = (0..=resolution - 2 * graded)
        .map(|k| k as f64 / (resolution - 2 * graded) as f64)
        .collect();
    for (layer, mirror) in [(left_layer, false), (right_layer, true)] {
        let lo = layer.clamp(1e-300, 0.25).ln();
        let hi = 0.25f64.ln();
        for k in 0..graded {
            let r = (lo + (hi - lo) * k as f64 / graded as f64).exp();
            nodes.push(if mirror { 1.0 - r } else { r });
        }
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
}

impl CdfTable {
    /// Tabulates `exp(log_density)` with an 8-point Gauss–Legendre rule per cell.
    pub fn build(log_density: impl Fn(f64, f64) -> f64, nodes: Vec<f64>) -> Result<Self> {
        let rule = GaussLegendre::new(NonZeroUsize::new(8).expect("nonzero"));
        let pairs = rule.as_node_weight_pairs();
        let cells = nodes.len() - 1;
        let mut logs = Vec::with_capacity(cells * pairs.len());
        for j in 0..cells {
            let (left, right) = (nodes[j], nodes[j + 1]);
            let width = right - left;
            for (node, _) in pairs {
                let level = left + 0.5 * width * (node + 1.0);
                // 1 - level without cancellation near the right endpoint
                let rest = (1.0 - right) + 0.5 * width * (1.0 - node);
                logs.push(log_density(level, rest) + (0.5 * width).ln());
            }
        }
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::Tabulation(format!(
                "density has no finite values (max log {shift})"
            )));
        }
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 0..cells {
            let cell: f64 = pairs
                .iter()
                .enumerate()
                .map(|(k, (_, weight))| weight * (logs[j * pairs.len() + k] - shift).exp())
                .sum();
            if !(cell >= 0.0) {
                return Err(Error::Tabulation(format!("cell {j} has mass {cell}")));
            }
            acc += cell;
            cumulative.push(acc);
        }
        if cumulative.windows(2).any(|w| w[1] < w[0]) || !(acc > 0.0) {
            return Err(Error::Tabulation(
                "cumulative masses are not monotone".into(),
            ));
        }
        let at_nodes: Vec<f64> = nodes.iter().map(|n| log_density(*n, 1.0 - n)).collect();
        let slopes = (0..cells)
            .map(|j| {
                let k = (at_nodes[j + 1] - at_nodes[j]) / (nodes[j + 1] - nodes[j]);
                if k.is_finite() {
                    k
                } else {
                    0.0
                }
            })
            .collect();
        Ok(CdfTable {
            log_mass: shift + acc.ln(),
            nodes,
            cumulative,
            slopes,
        })
    }

    /// Position within cell `j` holding the fraction `frac` of its mass.
    fn within(&self, j: usize, frac: f64) -> f64 {
        let width = self.nodes[j + 1] - self.nodes[j];
        let kw = self.slopes[j] * width;
        let x = if kw.abs() < 1e-9 {
            frac
        } else if kw > 0.0 {
            1.0 + (frac + (1.0 - frac) * (-kw).exp()).ln() / kw
        } else {
            (frac * kw.exp_m1()).ln_1p() / kw
        };
        self.nodes[j] + x.clamp(0.0, 1.0) * width
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn inverse(&self, u: f64) -> f64 {
        let last = self.cumulative.len() - 1;
        let target = u * self.cumulative[last];
        let j = self
            .cumulative
            .partition_point(|c| *c <= target)
            .clamp(1, last)
            - 1;
        let (lo, hi) = (self.cumulative[j], self.cumulative[j + 1]);
        let frac = if hi > lo {
            ((target - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.within(j, frac).min(1.0)
    }

    /// Normalised CDF at `level ∈ [0, 1]`.
    #[cfg(test)]
    pub fn cdf(&self, level: f64) -> f64 {
        let last = self.nodes.len() - 1;
        let j = self.nodes.partition_point(|n| *n <= level).clamp(1, last) - 1;
        let x = ((level - self.nodes[j]) / (self.nodes[j + 1] - self.nodes[j])).clamp(0.0, 1.0);
        let kw = self.slopes[j] * (self.nodes[j + 1] - self.nodes[j]);
        let frac = if kw.abs() < 1e-9 {
            x
        } else {
            (kw * x).exp_m1() / kw.exp_m1()
        };
        let value = self.cumulative[j] + frac * (self.cumulative[j + 1] - self.cumulative[j]);
        value / self.cumulative[last]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_shape() {
        let nodes = graded_nodes(512, 1e-6, 1e-9);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 1.0);
        assert!(nodes.len() <= 513 && nodes.len() > 500);
        assert!(nodes[1] <= 1e-6 + 1e-18);
        assert!(1.0 - nodes[nodes.len() - 2] < 1e-8);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn inverse_of_a_smooth_density() {
        // density 2L on [0, 1]: CDF L², inverse √u
        let table =
            CdfTable::build(|l: f64, _| (2.0 * l).ln(), graded_nodes(256, 0.1, 0.1)).unwrap();
        assert!(table.log_mass.abs() < 1e-14);
        for u in [0.0, 0.01, 0.3, 0.77, 0.999_999] {
            let l = table.inverse(u);
            assert!((l - u.sqrt()).abs() < 1e-3, "{u} {l}");
            assert!((table.cdf(l) - u).abs() < 1e-12);
        }
        let sup = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .map(|l| (table.cdf(l) - l * l).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1.0 / (256.0 * 256.0), "{sup}");
    }

    #[test]
    fn resolves_an_endpoint_layer() {
        // density ∝ exp(-r/w)/w in r = 1 - L, a layer of width w at L = 1
        let w = 1e-5;
        let table = CdfTable::build(
            |_, r: f64| -r / w - w.ln(),
            graded_nodes(512, 0.1, 1e-3 * w),
        )
        .unwrap();
        let sup = (0..=2000)
            .map(|k| 1.0 - 20.0 * w * k as f64 / 2000.0)
            .map(|l| (table.cdf(l) - (-(1.0 - l) / w).exp()).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-4, "{sup}");
    }

    #[test]
    fn rejects_empty_density() {
        assert!(CdfTable::build(|_, _| f64::NEG_INFINITY, graded_nodes(256, 0.1, 0.1)).is_err());
    }
}
