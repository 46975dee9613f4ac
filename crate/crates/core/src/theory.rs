//! Closed-form quantities for the linear predictor: the `psi` integral and
//! its bounds, the optimal shrinkage for two areas, the interval that
//! contains the optimum, dominance thresholds and the exact risk difference.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{ensure_finite, invalid, Result};
use crate::numeric::{normal, quadrature, roots};

/// Upper integration limit for `psi`; beyond it `t^2 phi(t) < 1e-300`.
const PSI_CUTOFF: f64 = 40.0;
const PSI_TOL: f64 = 1e-12;

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(invalid(format!("need m >= 2, got {m}")));
    }
    Ok(())
}

fn check_gamma_star(gamma_star: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma_star) {
        return Err(invalid(format!("gamma* must lie in [0, 1], got {gamma_star}")));
    }
    Ok(())
}

fn check_a(a: f64) -> Result<()> {
    if a.is_nan() || a < 0.0 {
        return Err(invalid(format!("a must be >= 0, got {a}")));
    }
    Ok(())
}

/// `psi(a) = int_0^inf t^2 Phi(a t) phi(t) dt`, by adaptive quadrature.
/// `a = +inf` gives the limit 1/2.
pub fn psi(a: f64) -> Result<f64> {
    check_a(a)?;
    if a == f64::INFINITY {
        return Ok(0.5);
    }
    let integral = quadrature::integrate(|t| t * t * normal::cdf(a * t) * normal::pdf(t), 0.0, PSI_CUTOFF, PSI_TOL)?;
    Ok(integral.value)
}

/// The piecewise lower and upper bounds `(rho1(a), rho2(a))` on `psi(a)`.
pub fn rho_bounds(a: f64) -> Result<(f64, f64)> {
    check_a(a)?;
    let rho1 = 0.25 + if a >= 1.0 { 1.0 / (4.0 * PI) + 0.125 } else { 0.0 };
    let rho2 = if a == 0.0 {
        0.25
    } else if a < FRAC_PI_2 {
        0.375 + a / (4.0 * PI)
    } else {
        0.5
    };
    Ok((rho1, rho2))
}

/// `a = sqrt(gamma* / (1 - gamma*))`, infinite at `gamma* = 1`.
pub fn psi_argument(gamma_star: f64) -> f64 {
    if gamma_star >= 1.0 {
        f64::INFINITY
    } else {
        (gamma_star / (1.0 - gamma_star)).sqrt()
    }
}

/// Risk-optimal shrinkage of the linear predictor when `m = 2`.
pub fn gamma_opt_m2(gamma_star: f64) -> Result<f64> {
    check_gamma_star(gamma_star)?;
    if gamma_star == 1.0 {
        return Ok(1.0);
    }
    let a = psi_argument(gamma_star);
    let spread = (gamma_star * (1.0 - gamma_star)).sqrt();
    Ok(gamma_star * (4.0 * psi(a)? - 1.0) + (1.0 - gamma_star) * (2.0 / PI) * spread)
}

/// Interval `[low, high]` that contains the optimal shrinkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBracket {
    pub low: f64,
    pub high: f64,
}

impl GammaBracket {
    pub fn contains(&self, gamma: f64) -> bool {
        self.low <= gamma && gamma <= self.high
    }
}

/// `u(m, gamma*) = m/(m-1) sqrt(gamma*) - gamma*/(m-1)`.
pub fn bracket_upper(m: usize, gamma_star: f64) -> f64 {
    let m = m as f64;
    m / (m - 1.0) * gamma_star.sqrt() - gamma_star / (m - 1.0)
}

pub fn gamma_bracket(m: usize, gamma_star: f64) -> Result<GammaBracket> {
    check_m(m)?;
    check_gamma_star(gamma_star)?;
    Ok(GammaBracket { low: gamma_star, high: bracket_upper(m, gamma_star) })
}

/// Largest `m` covered by the fitted weight polynomial.
pub const APPROX_MAX_M: usize = 30;

/// Fitted weight `alpha_m` of the bracket endpoints.
pub fn alpha_m(m: usize) -> f64 {
    let m = m as f64;
    0.8236 - 0.0573 * m + 0.0012 * m * m
}

/// Approximation to the optimal shrinkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox {
    pub gamma: f64,
    /// Set when `m` lies outside the fitted range and `sqrt(gamma*)` was
    /// returned instead.
    pub outside_fit: bool,
}

/// `alpha_m gamma* + (1 - alpha_m) u(m, gamma*)` for `2 <= m <= 30`, and
/// `sqrt(gamma*)` beyond.
pub fn gamma_approx(m: usize, gamma_star: f64) -> Result<GammaApprox> {
    check_m(m)?;
    check_gamma_star(gamma_star)?;
    if m > APPROX_MAX_M {
        return Ok(GammaApprox { gamma: gamma_star.sqrt(), outside_fit: true });
    }
    let alpha = alpha_m(m);
    Ok(GammaApprox { gamma: alpha * gamma_star + (1.0 - alpha) * bracket_upper(m, gamma_star), outside_fit: false })
}

/// Smallest `gamma` for which the linear predictor is guaranteed to beat the
/// ordered direct estimator.
pub fn theorem3_lower_gamma(m: usize, gamma_star: f64) -> Result<f64> {
    check_m(m)?;
    check_gamma_star(gamma_star)?;
    let mf = m as f64;
    Ok(mf / (mf - 1.0) * (2.0 * gamma_star.sqrt() - 1.0) - (2.0 * gamma_star - 1.0) / (mf - 1.0))
}

/// Largest `gamma*` for which every `gamma` in `[0, 1]` beats the direct
/// estimator.
pub fn corollary1_threshold(m: usize) -> Result<f64> {
    check_m(m)?;
    let mf = m as f64;
    let root = (mf - ((mf - 1.0).powi(2) + 1.0).sqrt()) / 2.0;
    Ok(root * root)
}

/// Largest `gamma*` for which the posterior-mean shrinkage `gamma = gamma*`
/// is guaranteed to beat the direct estimator.
pub fn corollary2_threshold(m: usize) -> Result<f64> {
    check_m(m)?;
    let mf = m as f64;
    Ok((mf - 1.0).powi(2) / (mf + 1.0).powi(2))
}

/// The quintic whose positive root fixes the `sqrt(gamma*)` dominance threshold.
pub fn threshold_polynomial(a: f64) -> f64 {
    a.powi(5) + a.powi(3) - FRAC_PI_2 * a * a + 2.0 * a - FRAC_PI_2
}

/// Root `a*` of the threshold quintic on `(0, 1)`.
pub fn threshold_root() -> Result<f64> {
    roots::bisect(threshold_polynomial, 0.0, 1.0, 1e-14)
}

/// `c = a*^2 / (1 + a*^2)`: for two areas, `sqrt(gamma*)` beats `gamma*`
/// as a shrinkage exactly when `gamma* > c`.
pub fn threshold_c() -> Result<f64> {
    let a = threshold_root()?;
    Ok(a * a / (1.0 + a * a))
}

/// Lower and upper bounds on `E sum theta_(i) y_(i)`.
pub fn lemma1_bounds(m: usize, mu: f64, sigma_u2: f64, sigma_e2_eff: f64) -> Result<(f64, f64)> {
    check_m(m)?;
    ensure_finite("mu", mu)?;
    ensure_finite("sigma_u2", sigma_u2)?;
    ensure_finite("sigma_e2_eff", sigma_e2_eff)?;
    if sigma_u2 < 0.0 || sigma_e2_eff < 0.0 {
        return Err(invalid("variances must be >= 0"));
    }
    let mf = m as f64;
    let signal = sigma_u2 + mu * mu;
    Ok((mf * signal, mf * (signal * (signal + sigma_e2_eff)).sqrt()))
}

/// Exact risk difference `R(theta^[2](gamma)) - R(theta^[1])` given the cross
/// moment `E sum theta_(i) y_(i)` (for `mu = 0`).
pub fn risk_difference_d(gamma: f64, m: usize, sigma_u2: f64, sigma_e2_eff: f64, cross_moment: f64) -> Result<f64> {
    check_m(m)?;
    ensure_finite("gamma", gamma)?;
    ensure_finite("cross_moment", cross_moment)?;
    let mf = m as f64;
    let total = sigma_u2 + sigma_e2_eff;
    let shrink = 1.0 - gamma;
    Ok(shrink * shrink * total * (mf - 1.0) - 2.0 * shrink * (mf * total - sigma_e2_eff - cross_moment))
}

/// `E(theta_(2) y_(2))` for two areas with `mu = 0`.
pub fn kella_risk_identity(gamma_star: f64, sigma_u2: f64, sigma_e2: f64) -> Result<f64> {
    check_gamma_star(gamma_star)?;
    if gamma_star == 1.0 {
        return Err(invalid("the two-area identity needs gamma* < 1"));
    }
    ensure_finite("sigma_u2", sigma_u2)?;
    ensure_finite("sigma_e2", sigma_e2)?;
    let spread = (gamma_star * (1.0 - gamma_star)).sqrt();
    Ok(2.0 * sigma_u2 * psi(psi_argument(gamma_star))? + sigma_e2 / PI * spread)
}
