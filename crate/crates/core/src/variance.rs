//! Moment estimators of the variance components and the plug-in shrinkage.

use crate::error::{ensure_finite, invalid, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub sigma_u2_hat: f64,
    /// Error variance of a single observation; passed through when known.
    pub sigma_e2_hat: f64,
    pub gamma_star_hat: f64,
    /// Whether the clamp at zero engaged for `sigma_u2_hat`.
    pub truncated: bool,
    /// Replicates per area used in the shrinkage ratio.
    pub n: usize,
}

impl VarianceEstimate {
    fn new(raw_u2: f64, sigma_e2: f64, n: usize) -> Self {
        let truncated = raw_u2 < 0.0;
        let sigma_u2_hat = raw_u2.max(0.0);
        let noise = sigma_e2 / n as f64;
        let gamma_star_hat = if sigma_u2_hat == 0.0 { 0.0 } else { sigma_u2_hat / (sigma_u2_hat + noise) };
        Self { sigma_u2_hat, sigma_e2_hat: sigma_e2, gamma_star_hat, truncated, n }
    }

    /// Error variance of an area mean.
    pub fn sigma_e2_eff(&self) -> f64 {
        self.sigma_e2_hat / self.n as f64
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss: CompensatedSum = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    ss.value() / (n - 1.0)
}

/// `max(s_y^2 - sigma_e2, 0)` for single observations per area.
pub fn estimate_sigma_u2(y: &[f64], sigma_e2: f64) -> Result<VarianceEstimate> {
    estimate_sigma_u2_means(y, sigma_e2, 1)
}

/// As [`estimate_sigma_u2`] for area means of `n` replicates each, where the
/// error variance of a mean is `sigma_e2 / n`.
pub fn estimate_sigma_u2_means(y_bar: &[f64], sigma_e2: f64, n: usize) -> Result<VarianceEstimate> {
    if y_bar.len() < 2 {
        return Err(invalid(format!("need at least 2 areas, got {}", y_bar.len())));
    }
    if n == 0 {
        return Err(invalid("need n >= 1"));
    }
    ensure_finite("sigma_e2", sigma_e2)?;
    if sigma_e2 <= 0.0 {
        return Err(invalid(format!("sigma_e2 must be > 0, got {sigma_e2}")));
    }
    for &v in y_bar {
        ensure_finite("y", v)?;
    }
    let raw = sample_variance(y_bar) - sigma_e2 / n as f64;
    Ok(VarianceEstimate::new(raw, sigma_e2, n))
}

/// Within- and between-area moment estimators from an `m x n` table stored
/// row-major (row `i` holds the replicates of area `i`).
pub fn estimate_both(y_rep: &[f64], m: usize, n: usize) -> Result<VarianceEstimate> {
    if n < 2 {
        return Err(invalid(format!("need n >= 2 replicates per area, got {n}")));
    }
    if m < 1 || y_rep.len() != m * n {
        return Err(invalid(format!("table has {} entries, expected {m} x {n}", y_rep.len())));
    }
    for &v in y_rep {
        ensure_finite("y", v)?;
    }
    let mut within = CompensatedSum::default();
    for row in y_rep.chunks_exact(n) {
        let mean = row.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        for &v in row {
            within.add((v - mean) * (v - mean));
        }
    }
    let sigma_e2_hat = within.value() / (m * (n - 1)) as f64;
    let total = sample_variance(y_rep);
    let raw = total - sigma_e2_hat;
    let mut est = VarianceEstimate::new(raw, sigma_e2_hat, n);
    if sigma_e2_hat == 0.0 && est.sigma_u2_hat > 0.0 {
        est.gamma_star_hat = 1.0;
    }
    Ok(est)
}
