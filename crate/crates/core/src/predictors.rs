//! Predictors of the ordered area parameters `theta_(1) <= ... <= theta_(m)`.
//!
//! Four families: the sorted observations, linear shrinkage of the sorted
//! observations toward their mean, the posterior expectation of the order
//! statistics (empirical best), and the quantile predictor built from the
//! averaged posterior distribution function.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{order_statistics, DistKind};
use crate::numeric::{roots, sum};
use crate::posterior::{normal_posterior, ordered_pair_means, PosteriorLaw};
use crate::theory;

/// Default number of posterior draws for the empirical best predictor.
pub const DEFAULT_DRAWS: usize = 1000;

/// How the shrinkage coefficient of the linear predictor is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    Fixed(f64),
    /// `gamma = gamma*`, the coefficient of the unordered best predictor.
    Star,
    SqrtStar,
    /// The fitted interpolation inside the optimal-gamma bracket.
    Approx,
    /// The risk-minimizing coefficient, found by Monte-Carlo search.
    SearchOptimal,
}

impl GammaRule {
    /// The coefficient for a given `(m, gamma*)`, or `None` for
    /// [`GammaRule::SearchOptimal`], which needs the risk engine.
    pub fn resolve(self, m: usize, gamma_star: f64) -> Result<Option<f64>> {
        Ok(match self {
            GammaRule::Fixed(g) => Some(g),
            GammaRule::Star => Some(gamma_star),
            GammaRule::SqrtStar => Some(gamma_star.sqrt()),
            GammaRule::Approx => Some(theory::gamma_approx(m, gamma_star)?.gamma),
            GammaRule::SearchOptimal => None,
        })
    }
}

/// Which conditional law the posterior-based predictors use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PosteriorAssumption {
    /// The law implied by the true effect distribution.
    #[default]
    MatchTrue,
    /// Always the normal-normal law, whatever generated the data.
    ForceNormal,
}

impl PosteriorAssumption {
    pub fn label(self) -> &'static str {
        match self {
            PosteriorAssumption::MatchTrue => "match",
            PosteriorAssumption::ForceNormal => "force-normal",
        }
    }
}

impl fmt::Display for PosteriorAssumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PosteriorAssumption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "match" => Ok(PosteriorAssumption::MatchTrue),
            "force-normal" => Ok(PosteriorAssumption::ForceNormal),
            other => Err(invalid(format!("unknown posterior mode '{other}' (expected match|force-normal)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorSpec {
    Direct,
    Linear(GammaRule),
    EmpiricalBest { posterior: PosteriorAssumption, draws: usize },
    ShenLouis { posterior: PosteriorAssumption },
}

impl PredictorSpec {
    pub fn empirical_best() -> Self {
        PredictorSpec::EmpiricalBest { posterior: PosteriorAssumption::default(), draws: DEFAULT_DRAWS }
    }

    pub fn shen_louis() -> Self {
        PredictorSpec::ShenLouis { posterior: PosteriorAssumption::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PredictorSpec::Linear(GammaRule::Fixed(g)) if !(0.0..=1.0).contains(&g) => {
                Err(invalid(format!("fixed gamma must lie in [0, 1], got {g}")))
            }
            PredictorSpec::EmpiricalBest { draws: 0, .. } => Err(invalid("empirical best needs at least one draw")),
            _ => Ok(()),
        }
    }

    /// Same predictor with the posterior settings replaced; families without
    /// a posterior are returned unchanged.
    pub fn with_posterior(self, posterior: PosteriorAssumption, draws: usize) -> Self {
        match self {
            PredictorSpec::EmpiricalBest { .. } => PredictorSpec::EmpiricalBest { posterior, draws },
            PredictorSpec::ShenLouis { .. } => PredictorSpec::ShenLouis { posterior },
            other => other,
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::Direct => f.write_str("direct"),
            PredictorSpec::Linear(rule) => match rule {
                GammaRule::Fixed(g) => write!(f, "linear@{g}"),
                GammaRule::Star => f.write_str("linear@star"),
                GammaRule::SqrtStar => f.write_str("linear@sqrt_star"),
                GammaRule::Approx => f.write_str("linear@approx"),
                GammaRule::SearchOptimal => f.write_str("linear@opt"),
            },
            PredictorSpec::EmpiricalBest { .. } => f.write_str("empirical_best"),
            PredictorSpec::ShenLouis { .. } => f.write_str("shen_louis"),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = Error;

    /// Parses the CSV labels. Posterior settings take their defaults; use
    /// [`PredictorSpec::with_posterior`] to override them.
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.trim() {
            "direct" => PredictorSpec::Direct,
            "empirical_best" => PredictorSpec::empirical_best(),
            "shen_louis" => PredictorSpec::shen_louis(),
            "linear@star" => PredictorSpec::Linear(GammaRule::Star),
            "linear@sqrt_star" => PredictorSpec::Linear(GammaRule::SqrtStar),
            "linear@approx" => PredictorSpec::Linear(GammaRule::Approx),
            "linear@opt" => PredictorSpec::Linear(GammaRule::SearchOptimal),
            other => {
                let literal =
                    other.strip_prefix("linear@").ok_or_else(|| invalid(format!("unknown predictor '{other}'")))?;
                let g: f64 =
                    literal.parse().map_err(|_| invalid(format!("bad gamma literal in predictor '{other}'")))?;
                PredictorSpec::Linear(GammaRule::Fixed(g))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// Predictions of `theta_(1), ..., theta_(m)`, nondecreasing.
    pub values: Vec<f64>,
    pub gamma_used: Option<f64>,
    /// Posterior draws per area (0 when no sampling took place).
    pub draws: usize,
    /// Monte-Carlo standard errors of the components, when sampled.
    pub std_errors: Option<Vec<f64>>,
}

impl PredictionResult {
    fn exact(values: Vec<f64>, gamma_used: Option<f64>) -> Self {
        Self { values, gamma_used, draws: 0, std_errors: None }
    }
}

fn check_areas(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(invalid(format!("need at least 2 areas, got {}", y.len())));
    }
    Ok(())
}

pub fn predict_direct(y: &[f64]) -> Result<PredictionResult> {
    check_areas(y)?;
    Ok(PredictionResult::exact(order_statistics(y)?, None))
}

/// `gamma y_(i) + (1 - gamma) y_bar` written into `out`, for already sorted `y`.
pub fn linear_from_sorted(sorted: &[f64], y_bar: f64, gamma: f64, out: &mut [f64]) {
    let pull = (1.0 - gamma) * y_bar;
    for (o, &v) in out.iter_mut().zip(sorted) {
        *o = gamma * v + pull;
    }
}

pub fn predict_linear(y: &[f64], gamma: f64) -> Result<PredictionResult> {
    check_areas(y)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let sorted = order_statistics(y)?;
    let y_bar = sum(y.iter().copied()) / y.len() as f64;
    let mut values = vec![0.0; y.len()];
    linear_from_sorted(&sorted, y_bar, gamma, &mut values);
    Ok(PredictionResult::exact(values, Some(gamma)))
}

/// Plug-in description of the per-area posteriors: the effect family, the
/// estimated mean and variance components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorModel {
    pub effect: DistKind,
    pub mu_hat: f64,
    pub sigma_u2: f64,
    /// Error variance of an area mean.
    pub sigma_e2_eff: f64,
}

impl PosteriorModel {
    pub fn gamma_star(&self) -> f64 {
        let total = self.sigma_u2 + self.sigma_e2_eff;
        if total == 0.0 {
            0.0
        } else {
            self.sigma_u2 / total
        }
    }

    pub fn law(&self, y: f64) -> Result<PosteriorLaw> {
        if self.effect == DistKind::Normal {
            return normal_posterior(y, self.mu_hat, self.gamma_star(), self.sigma_e2_eff);
        }
        if self.sigma_u2 == 0.0 {
            return Ok(PosteriorLaw::Point(self.mu_hat));
        }
        if self.sigma_e2_eff == 0.0 {
            return Ok(PosteriorLaw::Point(y));
        }
        let (su, se) = (self.sigma_u2.sqrt(), self.sigma_e2_eff.sqrt());
        match self.effect {
            DistKind::Laplace => PosteriorLaw::laplace(y, self.mu_hat, su, se),
            _ => PosteriorLaw::loc_exp(y, self.mu_hat, su, se),
        }
    }

    /// Posterior laws of the areas in increasing order of `y`.
    pub fn sorted_laws(&self, y: &[f64]) -> Result<Vec<PosteriorLaw>> {
        order_statistics(y)?.into_iter().map(|v| self.law(v)).collect()
    }
}

/// Posterior expectation of the order statistics. Areas are put in
/// increasing order of `y` before any draw, so the result does not depend on
/// how the areas are labelled.
pub fn predict_empirical_best<F, R>(y: &[f64], law_for: F, k: usize, rng: &mut R) -> Result<PredictionResult>
where
    F: Fn(f64) -> Result<PosteriorLaw>,
    R: Rng + ?Sized,
{
    check_areas(y)?;
    let laws = order_statistics(y)?.into_iter().map(law_for).collect::<Result<Vec<_>>>()?;
    empirical_best_from_laws(&laws, k, rng)
}

/// Empirical best predictor from per-area laws. Two normal laws of equal
/// spread are handled in closed form; everything else is sampled.
pub fn empirical_best_from_laws<R: Rng + ?Sized>(
    laws: &[PosteriorLaw],
    k: usize,
    rng: &mut R,
) -> Result<PredictionResult> {
    if let [PosteriorLaw::Normal { mean: a, sd: sa }, PosteriorLaw::Normal { mean: b, sd: sb }] = laws[..] {
        if sa == sb {
            let (lo, hi) = ordered_pair_means(a, b, sa);
            return Ok(PredictionResult::exact(vec![lo, hi], None));
        }
    }
    sample_ordered_means(laws, k, rng)
}

/// As [`predict_empirical_best`] but always by sampling, even where the
/// two-area closed form applies.
pub fn predict_empirical_best_sampled<F, R>(y: &[f64], law_for: F, k: usize, rng: &mut R) -> Result<PredictionResult>
where
    F: Fn(f64) -> Result<PosteriorLaw>,
    R: Rng + ?Sized,
{
    check_areas(y)?;
    let laws = order_statistics(y)?.into_iter().map(law_for).collect::<Result<Vec<_>>>()?;
    sample_ordered_means(&laws, k, rng)
}

/// Averages `k` sorted vectors, each holding one draw per law.
pub fn sample_ordered_means<R: Rng + ?Sized>(laws: &[PosteriorLaw], k: usize, rng: &mut R) -> Result<PredictionResult> {
    if k == 0 {
        return Err(invalid("need at least one posterior draw"));
    }
    if laws.iter().all(|l| matches!(l, PosteriorLaw::Point(_))) {
        let points: Vec<f64> = laws.iter().map(|l| l.mean()).collect();
        return Ok(PredictionResult::exact(order_statistics(&points)?, None));
    }
    let m = laws.len();
    let mut draw = vec![0.0; m];
    let mut acc = vec![0.0; m];
    let mut acc2 = vec![0.0; m];
    for _ in 0..k {
        for (d, law) in draw.iter_mut().zip(laws) {
            *d = law.sample(rng);
        }
        draw.sort_unstable_by(f64::total_cmp);
        for ((a, a2), &d) in acc.iter_mut().zip(acc2.iter_mut()).zip(&draw) {
            *a += d;
            *a2 += d * d;
        }
    }
    let kf = k as f64;
    let values: Vec<f64> = acc.iter().map(|a| a / kf).collect();
    let std_errors = if k > 1 {
        acc2.iter()
            .zip(&values)
            .map(|(a2, mean)| ((a2 / kf - mean * mean).max(0.0) * kf / (kf - 1.0) / kf).sqrt())
            .collect()
    } else {
        vec![f64::NAN; m]
    };
    Ok(PredictionResult { values, gamma_used: None, draws: k, std_errors: Some(std_errors) })
}

/// Averaged posterior distribution function under the normal-normal law.
pub fn g_bar(t: f64, y: &[f64], mu_hat: f64, gamma_star: f64, sigma_e2_eff: f64) -> Result<f64> {
    if !(gamma_star > 0.0 && gamma_star <= 1.0) {
        return Err(invalid(format!("averaged posterior CDF needs 0 < gamma* <= 1, got {gamma_star}")));
    }
    if y.is_empty() {
        return Err(invalid("need at least one area"));
    }
    let laws = y.iter().map(|&v| normal_posterior(v, mu_hat, gamma_star, sigma_e2_eff)).collect::<Result<Vec<_>>>()?;
    Ok(g_bar_laws(t, &laws))
}

/// `(1/m) sum_i P(theta_i <= t | y_i)` for arbitrary laws.
pub fn g_bar_laws(t: f64, laws: &[PosteriorLaw]) -> f64 {
    sum(laws.iter().map(|l| l.cdf(t))) / laws.len() as f64
}

/// Quantile predictor under the normal-normal law with plug-in mean.
pub fn predict_shen_louis(y: &[f64], mu_hat: f64, gamma_star: f64, sigma_e2_eff: f64) -> Result<PredictionResult> {
    if y.is_empty() {
        return Err(invalid("need at least one area"));
    }
    if gamma_star == 0.0 {
        return Ok(PredictionResult::exact(vec![mu_hat; y.len()], None));
    }
    if !(gamma_star > 0.0 && gamma_star <= 1.0) {
        return Err(invalid(format!("gamma* must lie in [0, 1], got {gamma_star}")));
    }
    let laws = y.iter().map(|&v| normal_posterior(v, mu_hat, gamma_star, sigma_e2_eff)).collect::<Result<Vec<_>>>()?;
    predict_shen_louis_laws(&laws)
}

/// Largest accepted `|G_bar(U_j) - (2j - 1)/(2m)|`.
pub const SHEN_LOUIS_RESIDUAL: f64 = 1e-8;

/// Solves `G_bar(U_j) = (2j - 1)/(2m)` for `j = 1..m`.
pub fn predict_shen_louis_laws(laws: &[PosteriorLaw]) -> Result<PredictionResult> {
    if laws.is_empty() {
        return Err(invalid("need at least one area"));
    }
    if laws.iter().all(|l| matches!(l, PosteriorLaw::Point(_))) {
        let points: Vec<f64> = laws.iter().map(|l| l.mean()).collect();
        return Ok(PredictionResult::exact(order_statistics(&points)?, None));
    }
    let mixture = Mixture::new(laws);
    let m = laws.len();
    let target = |j: usize| (2 * j + 1) as f64 / (2 * m) as f64;

    let (mut lo, mut hi) = mixture.initial_bracket();
    let mut widen = 0;
    while mixture.cdf(lo) >= target(0) || mixture.cdf(hi) <= target(m - 1) {
        let half = hi - lo;
        lo -= half;
        hi += half;
        widen += 1;
        if widen > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Internal("could not bracket the averaged posterior quantiles".into()));
        }
    }

    let xtol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    let mut values = Vec::with_capacity(m);
    let mut left = lo;
    for j in 0..m {
        let p = target(j);
        let root = roots::newton_increasing(
            |t| {
                let (c, d) = mixture.cdf_and_density(t);
                (c - p, d)
            },
            left,
            hi,
            left,
            1e-13,
            xtol,
        )?;
        let residual = (mixture.cdf(root) - p).abs();
        if residual > SHEN_LOUIS_RESIDUAL {
            return Err(Error::Internal(format!("quantile {p} solved only to residual {residual:e}")));
        }
        values.push(root);
        left = root;
    }
    Ok(PredictionResult::exact(values, None))
}

/// Distance in standard deviations beyond which a normal CDF is 0 or 1 in
/// double precision.
const SATURATION: f64 = 9.0;

/// The averaged distribution function, with a fast path for normal laws of
/// a common spread (sorted means, only the non-saturated window evaluated).
enum Mixture<'a> {
    Normal { means: Vec<f64>, sd: f64 },
    General(&'a [PosteriorLaw]),
}

impl<'a> Mixture<'a> {
    fn new(laws: &'a [PosteriorLaw]) -> Self {
        let common = match laws[0] {
            PosteriorLaw::Normal { sd, .. } => Some(sd),
            _ => None,
        };
        if let Some(sd) = common {
            let mut means = Vec::with_capacity(laws.len());
            for law in laws {
                match *law {
                    PosteriorLaw::Normal { mean, sd: s } if s == sd => means.push(mean),
                    _ => return Mixture::General(laws),
                }
            }
            means.sort_unstable_by(f64::total_cmp);
            return Mixture::Normal { means, sd };
        }
        Mixture::General(laws)
    }

    fn initial_bracket(&self) -> (f64, f64) {
        match self {
            Mixture::Normal { means, sd } => (means[0] - 10.0 * sd, means[means.len() - 1] + 10.0 * sd),
            Mixture::General(laws) => {
                let scale = laws.iter().map(|l| l.scale()).fold(0.0, f64::max);
                let (lo, hi) = laws
                    .iter()
                    .map(|l| l.mean())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c), b.max(c)));
                (lo - 10.0 * scale, hi + 10.0 * scale)
            }
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        self.cdf_and_density(t).0
    }

    fn cdf_and_density(&self, t: f64) -> (f64, f64) {
        match self {
            Mixture::Normal { means, sd } => {
                let m = means.len() as f64;
                // means below t - 9 sd contribute exactly 1, above t + 9 sd exactly 0
                let below = means.partition_point(|&c| c < t - SATURATION * sd);
                let above = means.partition_point(|&c| c <= t + SATURATION * sd);
                let mut c = below as f64;
                let mut d = 0.0;
                for &mean in &means[below..above] {
                    let z = (t - mean) / sd;
                    c += crate::numeric::normal::cdf(z);
                    d += crate::numeric::normal::pdf(z);
                }
                (c / m, d / (m * sd))
            }
            Mixture::General(laws) => {
                let m = laws.len() as f64;
                let c = sum(laws.iter().map(|l| l.cdf(t)));
                let d = sum(laws.iter().map(|l| l.density(t)));
                (c / m, d / m)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::normal;
    use crate::posterior::kella_conditional_means;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn direct_and_linear_examples() {
        assert_eq!(predict_direct(&[2.0, 1.0]).unwrap().values, vec![1.0, 2.0]);
        let y = [3.0, -1.0, 0.5, 8.0];
        assert_eq!(predict_linear(&y, 1.0).unwrap().values, predict_direct(&y).unwrap().values);
        let flat = predict_linear(&y, 0.0).unwrap().values;
        assert!(flat.iter().all(|&v| v == 2.625));
        assert_eq!(predict_linear(&[0.0, 2.0], 0.5).unwrap().values, vec![0.5, 1.5]);
        assert!(predict_linear(&y, 1.1).is_err());
        assert!(predict_direct(&[1.0]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for label in [
            "direct",
            "linear@star",
            "linear@sqrt_star",
            "linear@opt",
            "linear@approx",
            "linear@0.25",
            "empirical_best",
            "shen_louis",
        ] {
            let spec: PredictorSpec = label.parse().unwrap();
            assert_eq!(spec.to_string(), label);
        }
        assert!("linear@1.5".parse::<PredictorSpec>().is_err());
        assert!("linear@abc".parse::<PredictorSpec>().is_err());
        assert!("oracle".parse::<PredictorSpec>().is_err());
        assert_eq!("force-normal".parse::<PosteriorAssumption>().unwrap(), PosteriorAssumption::ForceNormal);
    }

    #[test]
    fn gamma_rules_resolve() {
        assert_eq!(GammaRule::Star.resolve(10, 0.49).unwrap(), Some(0.49));
        assert_eq!(GammaRule::SqrtStar.resolve(10, 0.49).unwrap(), Some(0.7));
        assert_eq!(GammaRule::SearchOptimal.resolve(10, 0.49).unwrap(), None);
        let approx = GammaRule::Approx.resolve(10, 0.5).unwrap().unwrap();
        assert_eq!(approx, theory::gamma_approx(10, 0.5).unwrap().gamma);
    }

    fn normal_model(mu_hat: f64, gamma_star: f64, s2: f64) -> impl Fn(f64) -> Result<PosteriorLaw> {
        move |v| normal_posterior(v, mu_hat, gamma_star, s2)
    }

    #[test]
    fn empirical_best_two_areas_uses_closed_form() {
        let y = [0.3, -1.1];
        let exact = kella_conditional_means(0.3, -1.1, -0.4, 0.6, 1.5).unwrap();
        let r = predict_empirical_best(&y, normal_model(-0.4, 0.6, 1.5), 10, &mut rng(1)).unwrap();
        assert!((r.values[0] - exact.0).abs() < 1e-15 && (r.values[1] - exact.1).abs() < 1e-15);
        assert_eq!(r.draws, 0);
    }

    #[test]
    fn empirical_best_sampling_matches_closed_form() {
        let y = [0.3, -1.1];
        let (lo, hi) = kella_conditional_means(0.3, -1.1, -0.4, 0.6, 1.5).unwrap();
        let r = predict_empirical_best_sampled(&y, normal_model(-0.4, 0.6, 1.5), 1_000_000, &mut rng(2)).unwrap();
        let se = r.std_errors.unwrap();
        assert!((r.values[0] - lo).abs() < 3.0 * se[0], "{} vs {lo}", r.values[0]);
        assert!((r.values[1] - hi).abs() < 3.0 * se[1], "{} vs {hi}", r.values[1]);
    }

    #[test]
    fn empirical_best_exact_observations() {
        let y = [4.0, -2.0, 1.0];
        let r = predict_empirical_best(&y, normal_model(0.0, 1.0, 0.0), 5, &mut rng(3)).unwrap();
        assert_eq!(r.values, vec![-2.0, 1.0, 4.0]);
    }

    #[test]
    fn empirical_best_preserves_sum() {
        let y = [1.0, -0.5, 2.5, 0.0, 3.1];
        let y_bar = y.iter().sum::<f64>() / 5.0;
        let g = 0.4;
        let r = predict_empirical_best(&y, normal_model(y_bar, g, 1.0), 20_000, &mut rng(4)).unwrap();
        let expected: f64 = y.iter().map(|v| g * v + (1.0 - g) * y_bar).sum();
        let sd = (g * 1.0 * 5.0 / 20_000.0f64).sqrt();
        assert!((r.values.iter().sum::<f64>() - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn g_bar_limits_and_monotone() {
        let y = [0.0, 1.0, -2.0];
        assert_eq!(g_bar(-1e3, &y, 0.0, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(g_bar(1e3, &y, 0.0, 0.5, 1.0).unwrap(), 1.0);
        let single = g_bar(0.7, &[1.0], 0.0, 0.5, 2.0).unwrap();
        assert!((single - normal::cdf((0.7 - 0.5) / 1.0)).abs() < 1e-15);
        let mut last = 0.0;
        for i in -100..100 {
            let v = g_bar(i as f64 * 0.05, &y, 0.0, 0.5, 1.0).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(g_bar(0.0, &y, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn shen_louis_single_area_is_posterior_mean() {
        let r = predict_shen_louis(&[2.0], 0.0, 0.5, 1.0).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shen_louis_equal_observations_are_normal_quantiles() {
        let m = 7;
        let y = vec![1.3; m];
        let (g, s2, mu_hat) = (0.4, 2.0, 0.3);
        let r = predict_shen_louis(&y, mu_hat, g, s2).unwrap();
        let centre = g * 1.3 + (1.0 - g) * mu_hat;
        let sd = (g * s2).sqrt();
        for (j, v) in r.values.iter().enumerate() {
            let p = (2 * j + 1) as f64 / (2 * m) as f64;
            assert!((v - (centre + sd * normal::quantile(p))).abs() < 1e-8);
        }
    }

    #[test]
    fn shen_louis_degenerate_gamma() {
        let r = predict_shen_louis(&[1.0, 5.0], 2.5, 0.0, 1.0).unwrap();
        assert_eq!(r.values, vec![2.5, 2.5]);
        let r = predict_shen_louis(&[5.0, 1.0], 2.5, 1.0, 0.0).unwrap();
        assert_eq!(r.values, vec![1.0, 5.0]);
    }

    #[test]
    fn shen_louis_residuals_on_random_instances() {
        let mut r = rng(5);
        for _ in 0..20 {
            let y: Vec<f64> = (0..100).map(|_| 3.0 * normal::inverse_cdf_draw(&mut r)).collect();
            let y_bar = y.iter().sum::<f64>() / 100.0;
            let g = 0.05 + 0.9 * normal::open_unit(rand::RngCore::next_u64(&mut r));
            let out = predict_shen_louis(&y, y_bar, g, 1.0).unwrap();
            for (j, v) in out.values.iter().enumerate() {
                let p = (2 * j + 1) as f64 / 200.0;
                assert!((g_bar(*v, &y, y_bar, g, 1.0).unwrap() - p).abs() <= SHEN_LOUIS_RESIDUAL);
                if j > 0 {
                    assert!(*v > out.values[j - 1]);
                }
            }
        }
    }

    #[test]
    fn shen_louis_with_non_normal_laws() {
        let model = PosteriorModel { effect: DistKind::Laplace, mu_hat: 0.2, sigma_u2: 1.0, sigma_e2_eff: 0.5 };
        let y = [-2.0, 0.1, 0.4, 3.0, 1.1];
        let laws = model.sorted_laws(&y).unwrap();
        let r = predict_shen_louis_laws(&laws).unwrap();
        for (j, v) in r.values.iter().enumerate() {
            let p = (2 * j + 1) as f64 / 10.0;
            assert!((g_bar_laws(*v, &laws) - p).abs() <= SHEN_LOUIS_RESIDUAL);
        }
        let model = PosteriorModel { effect: DistKind::LocationExp, ..model };
        let laws = model.sorted_laws(&y).unwrap();
        let r = predict_shen_louis_laws(&laws).unwrap();
        assert!(r.values[0] >= 0.2 - 1.0);
    }

    #[test]
    fn posterior_model_degenerate_components() {
        let model = PosteriorModel { effect: DistKind::Laplace, mu_hat: 0.5, sigma_u2: 0.0, sigma_e2_eff: 1.0 };
        assert_eq!(model.law(3.0).unwrap(), PosteriorLaw::Point(0.5));
        let model = PosteriorModel { sigma_u2: 1.0, sigma_e2_eff: 0.0, ..model };
        assert_eq!(model.law(3.0).unwrap(), PosteriorLaw::Point(3.0));
    }

    proptest! {
        #[test]
        fn predictions_are_nondecreasing(y in prop::collection::vec(-20.0f64..20.0, 2..30), g in 0.0f64..=1.0) {
            let lin = predict_linear(&y, g).unwrap().values;
            prop_assert!(lin.windows(2).all(|w| w[0] <= w[1]));
            let y_bar = y.iter().sum::<f64>() / y.len() as f64;
            let eb = predict_empirical_best(&y, normal_model(y_bar, g, 1.0), 50, &mut rng(6)).unwrap().values;
            prop_assert!(eb.windows(2).all(|w| w[0] <= w[1]));
            if g > 0.0 {
                let sl = predict_shen_louis(&y, y_bar, g, 1.0).unwrap().values;
                prop_assert!(sl.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn empirical_best_ignores_area_labels(y in prop::collection::vec(-5.0f64..5.0, 3..12), shift in 1usize..11) {
            let mut moved = y.clone();
            moved.rotate_left(shift % y.len());
            moved.reverse();
            let a = predict_empirical_best(&y, normal_model(0.0, 0.5, 1.0), 30, &mut rng(7)).unwrap();
            let b = predict_empirical_best(&moved, normal_model(0.0, 0.5, 1.0), 30, &mut rng(7)).unwrap();
            prop_assert_eq!(a.values, b.values);
        }

        #[test]
        fn sorting_never_hurts(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..25),
            g in 0.0f64..=1.0,
        ) {
            let theta: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let y_bar = y.iter().sum::<f64>() / y.len() as f64;
            let unordered: f64 = y.iter().zip(&theta).map(|(v, t)| (g * v + (1.0 - g) * y_bar - t).powi(2)).sum();
            let pred = predict_linear(&y, g).unwrap().values;
            let sorted_theta = order_statistics(&theta).unwrap();
            let ordered: f64 = pred.iter().zip(&sorted_theta).map(|(p, t)| (p - t).powi(2)).sum();
            prop_assert!(ordered <= unordered + 1e-9 * (1.0 + unordered));
        }
    }
}
