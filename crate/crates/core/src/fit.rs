//! Least-squares power-law fits on log–log data.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
}

/// Fits `log y = exponent * log x + intercept` over samples with `x > 0`, `y > 0`.
/// Degenerate inputs (fewer than two usable samples, or constant `y`) give exponent 0.
pub fn power_fit(samples: &[(f64, f64)]) -> PowerFit {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 || pts.iter().all(|p| p.1 == pts[0].1) {
        let intercept = pts.first().map(|p| p.1).unwrap_or(0.0);
        return PowerFit {
            exponent: 0.0,
            intercept,
            residual: 0.0,
        };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return PowerFit {
            exponent: 0.0,
            intercept: my,
            residual: 0.0,
        };
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - exponent * p.0 - intercept).powi(2))
        .sum();
    PowerFit {
        exponent,
        intercept,
        residual: (ss / n).sqrt(),
    }
}

/// `count` radii spaced geometrically on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let q = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * q.powi(i as i32)).collect()
}
