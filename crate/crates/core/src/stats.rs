//! Small statistical helpers: Kolmogorov–Smirnov, Wilson intervals, least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Result};

/// Two-sided one-sample KS statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS statistic for `n` samples.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// Wilson score interval for `hits` successes in `trials` at normal quantile `z`.
pub fn wilson_interval(hits: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Least-squares coefficients of `rows · β ≈ rhs`.
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if m < k || k == 0 {
        return Err(param(format!(
            "least squares needs at least {k} rows, got {m}"
        )));
    }
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let beta = svd
        .solve(&b, 1e-14)
        .map_err(|e| param(format!("least squares failed: {e}")))?;
    Ok(beta.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_uniform_grid() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&mut xs, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
        assert!(d < ks_critical_1pct(1000));
    }

    #[test]
    fn wilson_brackets_the_rate() {
        let (lo, hi) = wilson_interval(30, 1000, Z_99);
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(wilson_interval(0, 100, Z_99).0, 0.0);
    }

    #[test]
    fn recovers_linear_model() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![1.0, i as f64, (i * i) as f64])
            .collect();
        let rhs: Vec<f64> = (0..5)
            .map(|i| 2.0 - 0.5 * i as f64 + 0.25 * (i * i) as f64)
            .collect();
        let beta = least_squares(&rows, &rhs).unwrap();
        for (b, e) in beta.iter().zip([2.0, -0.5, 0.25]) {
            assert!((b - e).abs() < 1e-12);
        }
    }
}
