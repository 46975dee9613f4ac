//! Scenario configuration and sampling from the two-stage model
//! `y_ij = mu + u_i + e_ij`, `i = 1..m`, `j = 1..n`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::numeric::normal;

/// Shape of an effect or error distribution. Every shape is standardized to
/// mean zero and the configured variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Normal,
    Laplace,
    LocationExp,
}

impl DistKind {
    pub fn label(self) -> &'static str {
        match self {
            DistKind::Normal => "normal",
            DistKind::Laplace => "laplace",
            DistKind::LocationExp => "locexp",
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(DistKind::Normal),
            "laplace" => Ok(DistKind::Laplace),
            "locexp" => Ok(DistKind::LocationExp),
            other => Err(invalid(format!("unknown distribution '{other}' (normal|laplace|locexp)"))),
        }
    }
}

/// Which variance components the predictors must estimate from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarianceMode {
    Known,
    UnknownU,
    UnknownBoth,
}

impl VarianceMode {
    pub fn label(self) -> &'static str {
        match self {
            VarianceMode::Known => "known",
            VarianceMode::UnknownU => "unknown-u",
            VarianceMode::UnknownBoth => "unknown-both",
        }
    }
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(VarianceMode::Known),
            "unknown-u" => Ok(VarianceMode::UnknownU),
            "unknown-both" => Ok(VarianceMode::UnknownBoth),
            other => Err(invalid(format!("unknown variance mode '{other}' (known|unknown-u|unknown-both)"))),
        }
    }
}

/// A zero-mean distribution with a given variance.
///
/// Laplace uses scale `b = sqrt(variance / 2)`; the location exponential uses
/// scale `b = sqrt(variance)` shifted by `a = -b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectDistribution {
    pub kind: DistKind,
    pub variance: f64,
}

impl EffectDistribution {
    pub fn new(kind: DistKind, variance: f64) -> Result<Self> {
        ensure_finite("variance", variance)?;
        if variance < 0.0 {
            return Err(invalid(format!("variance must be >= 0, got {variance}")));
        }
        Ok(Self { kind, variance })
    }

    /// Scale parameter `b` of the underlying family.
    pub fn scale(&self) -> f64 {
        match self.kind {
            DistKind::Normal => self.variance.sqrt(),
            DistKind::Laplace => (self.variance / 2.0).sqrt(),
            DistKind::LocationExp => self.variance.sqrt(),
        }
    }

    /// Transforms one uniform on (0, 1) into a draw. Every kind is an exact
    /// inverse-CDF map, so each variate costs exactly one uniform.
    pub fn from_uniform(&self, u: f64) -> f64 {
        let b = self.scale();
        match self.kind {
            DistKind::Normal => b * normal::quantile(u),
            DistKind::Laplace => {
                if u < 0.5 {
                    b * (2.0 * u).ln()
                } else {
                    -b * (2.0 * (1.0 - u)).ln()
                }
            }
            DistKind::LocationExp => -b * u.ln() - b,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.from_uniform(normal::open_unit(rng.next_u64()))
    }
}

/// Full specification of one simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub mu: f64,
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    /// Number of areas.
    pub m: usize,
    /// Observations per area.
    pub n: usize,
    pub f_dist: DistKind,
    pub g_dist: DistKind,
    pub variance_mode: VarianceMode,
}

impl ModelConfig {
    /// Normal effects and errors, known variances.
    pub fn normal(m: usize, sigma_u2: f64, sigma_e2: f64) -> Self {
        Self {
            mu: 0.0,
            sigma_u2,
            sigma_e2,
            m,
            n: 1,
            f_dist: DistKind::Normal,
            g_dist: DistKind::Normal,
            variance_mode: VarianceMode::Known,
        }
    }

    /// Fixes `sigma_u2` and back-solves `sigma_e2` so that the shrinkage
    /// coefficient of the area means equals `gamma_star`.
    pub fn with_gamma_star(mut self, sigma_u2: f64, gamma_star: f64) -> Result<Self> {
        if !(gamma_star > 0.0 && gamma_star <= 1.0) {
            return Err(invalid(format!("gamma* must lie in (0, 1], got {gamma_star}")));
        }
        self.sigma_u2 = sigma_u2;
        self.sigma_e2 = self.n as f64 * sigma_u2 * (1.0 / gamma_star - 1.0);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        ensure_finite("sigma_u2", self.sigma_u2)?;
        ensure_finite("sigma_e2", self.sigma_e2)?;
        if self.sigma_u2 < 0.0 {
            return Err(invalid(format!("sigma_u2 must be >= 0, got {}", self.sigma_u2)));
        }
        if self.sigma_e2 < 0.0 {
            return Err(invalid(format!("sigma_e2 must be >= 0, got {}", self.sigma_e2)));
        }
        if self.m < 2 {
            return Err(invalid(format!("m must be >= 2, got {}", self.m)));
        }
        if self.n < 1 {
            return Err(invalid("n must be >= 1"));
        }
        if self.g_dist == DistKind::Laplace {
            return Err(invalid("error distribution must be normal or locexp"));
        }
        if self.variance_mode == VarianceMode::UnknownBoth && self.n < 2 {
            return Err(invalid("variance mode unknown-both needs n >= 2"));
        }
        Ok(())
    }

    /// Error variance of an area mean, `sigma_e2 / n`.
    pub fn sigma_e2_eff(&self) -> f64 {
        self.sigma_e2 / self.n as f64
    }

    pub fn gamma_star(&self) -> f64 {
        if self.sigma_u2 == 0.0 && self.sigma_e2 == 0.0 {
            return 0.0;
        }
        self.sigma_u2 / (self.sigma_u2 + self.sigma_e2_eff())
    }

    pub fn effect_distribution(&self) -> EffectDistribution {
        EffectDistribution { kind: self.f_dist, variance: self.sigma_u2 }
    }

    pub fn error_distribution(&self) -> EffectDistribution {
        EffectDistribution { kind: self.g_dist, variance: self.sigma_e2 }
    }

    /// Number of 64-bit draws [`draw_sample`] consumes per sample.
    pub fn draws_per_sample(&self) -> usize {
        self.m * (1 + self.n)
    }
}

/// `sigma_u2 / (sigma_u2 + sigma_e2 / n)`, the shrinkage coefficient of the
/// best linear predictor of an unordered area effect.
pub fn gamma_star(sigma_u2: f64, sigma_e2: f64, n: usize) -> Result<f64> {
    ensure_finite("sigma_u2", sigma_u2)?;
    ensure_finite("sigma_e2", sigma_e2)?;
    if sigma_u2 < 0.0 || sigma_e2 <= 0.0 {
        return Err(invalid(format!("need sigma_u2 >= 0 and sigma_e2 > 0, got ({sigma_u2}, {sigma_e2})")));
    }
    if n < 1 {
        return Err(invalid("n must be >= 1"));
    }
    Ok(sigma_u2 / (sigma_u2 + sigma_e2 / n as f64))
}

/// One realized draw of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Area parameters `theta_i = mu + u_i`.
    pub theta: Vec<f64>,
    /// Row-major `m x n` observations; present only when `n > 1`.
    pub y_rep: Option<Vec<f64>>,
    /// Area means (the observations themselves when `n = 1`).
    pub y: Vec<f64>,
    pub y_bar: f64,
    pub n: usize,
}

impl Sample {
    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// Observations of area `i` (length `n`).
    pub fn area(&self, i: usize) -> &[f64] {
        match &self.y_rep {
            Some(rep) => &rep[i * self.n..(i + 1) * self.n],
            None => std::slice::from_ref(&self.y[i]),
        }
    }
}

/// Draws one sample.
///
/// Consumes exactly `m * (1 + n)` 64-bit draws: first the `m` effects in area
/// order, then the `m * n` errors in row-major order. Every variate is an
/// exact inverse-CDF transform of one draw.
pub fn draw_sample<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Sample> {
    config.validate()?;
    let (m, n) = (config.m, config.n);
    let effects = config.effect_distribution();
    let errors = config.error_distribution();

    let theta: Vec<f64> = (0..m).map(|_| config.mu + effects.sample(rng)).collect();

    let (y, y_rep) = if n == 1 {
        let y: Vec<f64> = theta.iter().map(|t| t + errors.sample(rng)).collect();
        (y, None)
    } else {
        let mut rep = Vec::with_capacity(m * n);
        let mut means = Vec::with_capacity(m);
        for t in &theta {
            let start = rep.len();
            for _ in 0..n {
                rep.push(t + errors.sample(rng));
            }
            means.push(rep[start..].iter().sum::<f64>() / n as f64);
        }
        (means, Some(rep))
    };
    let y_bar = y.iter().sum::<f64>() / m as f64;
    Ok(Sample { theta, y_rep, y, y_bar, n })
}

/// Sorted copy of `v`, nondecreasing; ties keep their original order.
pub fn order_statistics(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| x.is_nan()) {
        return Err(invalid(format!("NaN at position {i}")));
    }
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}
