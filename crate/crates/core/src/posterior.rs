//! Conditional laws of an area parameter given its observation, for normal
//! errors and normal, Laplace or location-exponential effects.
//!
//! All non-degenerate laws here are Gaussian pieces restricted to half-lines,
//! so densities, distribution functions and exact samplers all reduce to the
//! standard normal primitives. Normalizers are kept in log space.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, invalid, Result};
use crate::numeric::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorKind {
    /// Degenerate law (zero effect variance, or error-free observations).
    Point,
    NormalNormal,
    LaplaceNormal,
    LocExpNormal,
}

/// Laplace effect with normal error: a two-piece Gaussian split at `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePieces {
    mu: f64,
    sd: f64,
    /// Centre of the Gaussian kernel used for `t <= mu`.
    left_center: f64,
    /// Centre of the Gaussian kernel used for `t > mu`.
    right_center: f64,
    /// Log-weights of the two kernels, `+(y - mu)/b` and `-(y - mu)/b`.
    left_log_weight: f64,
    right_log_weight: f64,
    /// Log of the total mass (in units of `sd * sqrt(2 pi)`).
    log_norm: f64,
    left_prob: f64,
}

/// Normal law `N(center, sd^2)` restricted to `[lower, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerTruncatedNormal {
    center: f64,
    sd: f64,
    lower: f64,
    log_mass: f64,
}

impl LowerTruncatedNormal {
    fn alpha(&self) -> f64 {
        (self.lower - self.center) / self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosteriorLaw {
    Point(f64),
    Normal { mean: f64, sd: f64 },
    Laplace(LaplacePieces),
    LocExp(LowerTruncatedNormal),
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn check_scales(sigma_u: f64, sigma_e: f64) -> Result<()> {
    ensure_finite("sigma_u", sigma_u)?;
    ensure_finite("sigma_e", sigma_e)?;
    if sigma_u <= 0.0 || sigma_e <= 0.0 {
        return Err(invalid(format!("posterior scales must be positive, got sigma_u={sigma_u}, sigma_e={sigma_e}")));
    }
    Ok(())
}

/// Posterior of `theta_i` when effects and errors are both normal:
/// `N(g y + (1 - g) mu_hat, g sigma_e2_eff)` with `g = gamma_star`.
pub fn normal_posterior(y: f64, mu_hat: f64, gamma_star: f64, sigma_e2_eff: f64) -> Result<PosteriorLaw> {
    ensure_finite("y", y)?;
    ensure_finite("mu_hat", mu_hat)?;
    ensure_finite("sigma_e2_eff", sigma_e2_eff)?;
    if !(0.0..=1.0).contains(&gamma_star) {
        return Err(invalid(format!("gamma* must lie in [0, 1], got {gamma_star}")));
    }
    if sigma_e2_eff < 0.0 {
        return Err(invalid("sigma_e2_eff must be >= 0"));
    }
    let mean = gamma_star * y + (1.0 - gamma_star) * mu_hat;
    let variance = gamma_star * sigma_e2_eff;
    if variance == 0.0 {
        Ok(PosteriorLaw::Point(mean))
    } else {
        Ok(PosteriorLaw::Normal { mean, sd: variance.sqrt() })
    }
}

impl PosteriorLaw {
    /// Posterior under a Laplace effect with standard deviation `sigma_u`
    /// (scale `b = sigma_u / sqrt 2`) and normal error with sd `sigma_e`.
    pub fn laplace(y: f64, mu: f64, sigma_u: f64, sigma_e: f64) -> Result<Self> {
        check_scales(sigma_u, sigma_e)?;
        ensure_finite("y", y)?;
        ensure_finite("mu", mu)?;
        let b = sigma_u / std::f64::consts::SQRT_2;
        let s = sigma_e;
        let shift = s * s / b;
        let left_center = y + shift;
        let right_center = y - shift;
        let left_log_weight = (y - mu) / b;
        let right_log_weight = -left_log_weight;
        let log_left = left_log_weight + normal::ln_cdf((mu - left_center) / s);
        let log_right = right_log_weight + normal::ln_sf((mu - right_center) / s);
        let log_norm = log_add_exp(log_left, log_right);
        Ok(PosteriorLaw::Laplace(LaplacePieces {
            mu,
            sd: s,
            left_center,
            right_center,
            left_log_weight,
            right_log_weight,
            log_norm,
            left_prob: (log_left - log_norm).exp(),
        }))
    }

    /// Posterior under a location-exponential effect (scale `sigma_u`, support
    /// `u >= -sigma_u`) with normal error sd `sigma_e`.
    pub fn loc_exp(y: f64, mu: f64, sigma_u: f64, sigma_e: f64) -> Result<Self> {
        check_scales(sigma_u, sigma_e)?;
        ensure_finite("y", y)?;
        ensure_finite("mu", mu)?;
        let center = y - sigma_e * sigma_e / sigma_u;
        let lower = mu - sigma_u;
        let log_mass = normal::ln_sf((lower - center) / sigma_e);
        Ok(PosteriorLaw::LocExp(LowerTruncatedNormal { center, sd: sigma_e, lower, log_mass }))
    }

    pub fn kind(&self) -> PosteriorKind {
        match self {
            PosteriorLaw::Point(_) => PosteriorKind::Point,
            PosteriorLaw::Normal { .. } => PosteriorKind::NormalNormal,
            PosteriorLaw::Laplace(_) => PosteriorKind::LaplaceNormal,
            PosteriorLaw::LocExp(_) => PosteriorKind::LocExpNormal,
        }
    }

    /// Density at `t`. A point mass has no density; it reports 0 off the atom
    /// and +inf on it.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            PosteriorLaw::Point(x) => {
                if t == x {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PosteriorLaw::Normal { mean, sd } => normal::pdf((t - mean) / sd) / sd,
            PosteriorLaw::Laplace(p) => {
                let log = if t <= p.mu {
                    p.left_log_weight + normal::ln_pdf((t - p.left_center) / p.sd)
                } else {
                    p.right_log_weight + normal::ln_pdf((t - p.right_center) / p.sd)
                };
                (log - p.log_norm).exp() / p.sd
            }
            PosteriorLaw::LocExp(p) => {
                if t < p.lower {
                    0.0
                } else {
                    (normal::ln_pdf((t - p.center) / p.sd) - p.log_mass).exp() / p.sd
                }
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            PosteriorLaw::Point(x) => {
                if t >= x {
                    1.0
                } else {
                    0.0
                }
            }
            PosteriorLaw::Normal { mean, sd } => normal::cdf((t - mean) / sd),
            PosteriorLaw::Laplace(p) => {
                if t <= p.mu {
                    (p.left_log_weight + normal::ln_cdf((t - p.left_center) / p.sd) - p.log_norm).exp()
                } else {
                    let upper = p.right_log_weight + normal::ln_sf((t - p.right_center) / p.sd) - p.log_norm;
                    -upper.exp_m1()
                }
            }
            PosteriorLaw::LocExp(p) => {
                if t <= p.lower {
                    0.0
                } else {
                    -(normal::ln_sf((t - p.center) / p.sd) - p.log_mass).exp_m1()
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PosteriorLaw::Point(x) => x,
            PosteriorLaw::Normal { mean, .. } => mean,
            PosteriorLaw::Laplace(p) => {
                let beta = (p.mu - p.left_center) / p.sd;
                let alpha = (p.mu - p.right_center) / p.sd;
                let left = p.left_center - p.sd * normal::inv_mills(-beta);
                let right = p.right_center + p.sd * normal::inv_mills(alpha);
                p.left_prob * left + (1.0 - p.left_prob) * right
            }
            PosteriorLaw::LocExp(p) => p.center + p.sd * normal::inv_mills(p.alpha()),
        }
    }

    /// A spread scale used to bracket quantiles: the sd for Gaussian laws,
    /// widened by the gap between the kernel centres for the Laplace case.
    pub fn scale(&self) -> f64 {
        match *self {
            PosteriorLaw::Point(_) => 0.0,
            PosteriorLaw::Normal { sd, .. } => sd,
            PosteriorLaw::Laplace(p) => p.sd + (p.left_center - p.right_center),
            PosteriorLaw::LocExp(p) => p.sd,
        }
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            PosteriorLaw::Point(x) => x,
            PosteriorLaw::LocExp(p) => p.lower,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Probability of the piece `t <= mu` (Laplace laws only).
    pub fn left_piece_probability(&self) -> Option<f64> {
        match self {
            PosteriorLaw::Laplace(p) => Some(p.left_prob),
            _ => None,
        }
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PosteriorLaw::Point(x) => x,
            PosteriorLaw::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            PosteriorLaw::Laplace(p) => {
                if normal::open_unit(rng.next_u64()) < p.left_prob {
                    let upper = (p.mu - p.left_center) / p.sd;
                    (p.left_center + p.sd * normal::truncated_above(upper, rng)).min(p.mu)
                } else {
                    let lower = (p.mu - p.right_center) / p.sd;
                    (p.right_center + p.sd * normal::truncated_below(lower, rng)).max(p.mu)
                }
            }
            PosteriorLaw::LocExp(p) => (p.center + p.sd * normal::truncated_below(p.alpha(), rng)).max(p.lower),
        }
    }
}

/// `k` independent exact draws from `law`.
pub fn sample_posterior<R: Rng + ?Sized>(law: &PosteriorLaw, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(invalid("need at least one posterior draw"));
    }
    Ok((0..k).map(|_| law.sample(rng)).collect())
}

/// Density at `t` of `theta_i | y_i` for a Laplace effect.
pub fn laplace_posterior_density(t: f64, y: f64, mu: f64, sigma_u: f64, sigma_e: f64) -> Result<f64> {
    Ok(PosteriorLaw::laplace(y, mu, sigma_u, sigma_e)?.density(t))
}

/// Density at `t` of `theta_i | y_i` for a location-exponential effect.
pub fn locexp_posterior_density(t: f64, y: f64, mu: f64, sigma_u: f64, sigma_e: f64) -> Result<f64> {
    Ok(PosteriorLaw::loc_exp(y, mu, sigma_u, sigma_e)?.density(t))
}

/// `(E min, E max)` of two independent `N(mean_i, sd^2)` variables.
pub fn ordered_pair_means(mean1: f64, mean2: f64, sd: f64) -> (f64, f64) {
    let spread = sd * std::f64::consts::SQRT_2;
    if spread == 0.0 {
        return (mean1.min(mean2), mean1.max(mean2));
    }
    let delta = (mean1 - mean2) / spread;
    let (p, q) = (normal::cdf(delta), normal::cdf(-delta));
    let bump = spread * normal::pdf(delta);
    (q * mean1 + p * mean2 - bump, p * mean1 + q * mean2 + bump)
}

/// Conditional means of the smaller and larger of two normal area
/// parameters given `(y1, y2)`, with `mu_hat` plugged in for the mean.
pub fn kella_conditional_means(
    y1: f64,
    y2: f64,
    mu_hat: f64,
    gamma_star: f64,
    sigma_e2_eff: f64,
) -> Result<(f64, f64)> {
    let a = normal_posterior(y1, mu_hat, gamma_star, sigma_e2_eff)?;
    let b = normal_posterior(y2, mu_hat, gamma_star, sigma_e2_eff)?;
    let sd = (gamma_star * sigma_e2_eff).sqrt();
    Ok(ordered_pair_means(a.mean(), b.mean(), sd))
}
