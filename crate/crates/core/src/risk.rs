//! Monte-Carlo risk engine.
//!
//! Every replicate draws its data from a stream keyed by
//! `(seed, scenario, replicate)`, so all predictors in one evaluation see the
//! same samples and results do not depend on the number of workers.
//! Replicate outputs are collected in index order and summed with
//! compensation.
//!
//! The loss of the linear predictor is a quadratic in `gamma` for each
//! replicate, `L(gamma) = gamma^2 A + 2 gamma B + C`. The search for the
//! optimal `gamma` therefore only needs the averages of `A`, `B`, `C`, which
//! makes an exhaustive 0.001 grid exact and cheap.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{draw_sample, order_statistics, DistKind, ModelConfig, Sample, VarianceMode};
use crate::numeric::{mean_and_se, CompensatedSum};
use crate::posterior::PosteriorLaw;
use crate::predictors::{
    empirical_best_from_laws, linear_from_sorted, predict_shen_louis_laws, GammaRule, PosteriorAssumption,
    PosteriorModel, PredictorSpec,
};
use crate::stream::{Purpose, StreamKey};
use crate::variance::{estimate_both, estimate_sigma_u2_means};

/// Which part of the ordered loss is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// `sum_i (pred_i - theta_(i))^2`.
    TotalOrderedLoss,
    /// `(pred_m - theta_(m))^2`.
    MseMax,
    /// `(pred_i - theta_(i))^2` for a 1-based index `i`.
    MseComponent(usize),
}

impl Metric {
    fn indices(self, m: usize) -> Result<std::ops::Range<usize>> {
        match self {
            Metric::TotalOrderedLoss => Ok(0..m),
            Metric::MseMax => Ok(m - 1..m),
            Metric::MseComponent(i) if (1..=m).contains(&i) => Ok(i - 1..i),
            Metric::MseComponent(i) => Err(invalid(format!("component {i} out of range 1..={m}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::TotalOrderedLoss => f.write_str("total_ordered_loss"),
            Metric::MseMax => f.write_str("mse_max"),
            Metric::MseComponent(i) => write!(f, "mse@{i}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "total_ordered_loss" => Ok(Metric::TotalOrderedLoss),
            "mse_max" => Ok(Metric::MseMax),
            other => other
                .strip_prefix("mse@")
                .and_then(|i| i.parse().ok())
                .map(Metric::MseComponent)
                .ok_or_else(|| invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Replication count, seeding and parallelism for one Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub replications: usize,
    pub seed: u64,
    /// Stream family; evaluations sharing `(seed, scenario)` share samples.
    pub scenario: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self { replications, seed, scenario: 0, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_scenario(mut self, scenario: u64) -> Self {
        self.scenario = scenario;
        self
    }

    fn key(&self) -> StreamKey {
        StreamKey::new(self.seed, self.scenario)
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(invalid(format!("need at least 2 replications, got {}", self.replications)));
        }
        Ok(())
    }

    /// Runs `f` for every replicate index and returns the results in index
    /// order.
    fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let n = self.replications as u64;
        if self.workers == 1 {
            return (0..n).map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let (mean, std_error) = mean_and_se(values);
        Self { mean, std_error, replications: values.len() }
    }
}

/// Paired difference `a - b` of per-replicate values from common streams.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<McEstimate> {
    if a.len() != b.len() {
        return Err(invalid("paired samples differ in length"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(McEstimate::from_values(&d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub mean_loss: f64,
    pub std_error: f64,
    pub replications: usize,
    pub seed: u64,
    pub predictor: PredictorSpec,
    pub metric: Metric,
    /// Coefficient used by a linear predictor with a searched `gamma`.
    pub gamma_used: Option<f64>,
}

/// `sum_i (pred_i - theta_(i))^2`; `theta` is sorted here, `pred` must
/// already be in increasing order.
pub fn ordered_loss(pred: &[f64], theta: &[f64]) -> Result<f64> {
    if pred.len() != theta.len() {
        return Err(invalid(format!("length mismatch: {} predictions, {} parameters", pred.len(), theta.len())));
    }
    let sorted = order_statistics(theta)?;
    Ok(squared_error(pred, &sorted, 0..pred.len()))
}

fn squared_error(pred: &[f64], theta_sorted: &[f64], idx: std::ops::Range<usize>) -> f64 {
    let mut acc = CompensatedSum::default();
    for i in idx {
        let d = pred[i] - theta_sorted[i];
        acc.add(d * d);
    }
    acc.value()
}

/// Per-replicate quadratic `(A, B, C)` of the linear predictor's loss
/// restricted to the metric's components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Quadratic {
    a: f64,
    b: f64,
    c: f64,
}

impl Quadratic {
    fn new(y_sorted: &[f64], y_bar: f64, theta_sorted: &[f64], idx: std::ops::Range<usize>) -> Self {
        let mut q = Quadratic::default();
        for i in idx {
            let d = y_sorted[i] - y_bar;
            let e = y_bar - theta_sorted[i];
            q.a += d * d;
            q.b += d * e;
            q.c += e * e;
        }
        q
    }

    fn at(&self, gamma: f64) -> f64 {
        (gamma * gamma * self.a + 2.0 * gamma * self.b + self.c).max(0.0)
    }
}

/// One replicate with everything the predictors need.
struct Replicate {
    sample: Sample,
    theta_sorted: Vec<f64>,
    y_sorted: Vec<f64>,
    /// Plug-in posterior description (estimated or known variances).
    plug_in: PosteriorModel,
}

fn prepare(config: &ModelConfig, key: &StreamKey, r: u64) -> Result<Replicate> {
    let mut rng = key.rng(Purpose::Data, r);
    let sample = draw_sample(config, &mut rng)?;
    let theta_sorted = order_statistics(&sample.theta)?;
    let y_sorted = order_statistics(&sample.y)?;
    let (sigma_u2, sigma_e2_eff) = match config.variance_mode {
        VarianceMode::Known => (config.sigma_u2, config.sigma_e2_eff()),
        VarianceMode::UnknownU => {
            let est = estimate_sigma_u2_means(&sample.y, config.sigma_e2, config.n)?;
            (est.sigma_u2_hat, est.sigma_e2_eff())
        }
        VarianceMode::UnknownBoth => {
            let table =
                sample.y_rep.as_deref().ok_or_else(|| Error::Internal("replicated observations missing".into()))?;
            let est = estimate_both(table, config.m, config.n)?;
            (est.sigma_u2_hat, est.sigma_e2_eff())
        }
    };
    let plug_in = PosteriorModel { effect: config.f_dist, mu_hat: sample.y_bar, sigma_u2, sigma_e2_eff };
    Ok(Replicate { sample, theta_sorted, y_sorted, plug_in })
}

impl Replicate {
    fn posterior_laws(&self, assumption: PosteriorAssumption) -> Result<Vec<PosteriorLaw>> {
        let model = match assumption {
            PosteriorAssumption::MatchTrue => self.plug_in,
            PosteriorAssumption::ForceNormal => PosteriorModel { effect: DistKind::Normal, ..self.plug_in },
        };
        self.y_sorted.iter().map(|&v| model.law(v)).collect()
    }

    /// Predictions for `spec`, or `None` for a searched linear coefficient.
    fn predict(&self, spec: &PredictorSpec, key: &StreamKey, r: u64) -> Result<Option<Vec<f64>>> {
        let m = self.y_sorted.len();
        let values = match *spec {
            PredictorSpec::Direct => self.y_sorted.clone(),
            PredictorSpec::Linear(rule) => {
                let Some(gamma) = rule.resolve(m, self.plug_in.gamma_star())? else {
                    return Ok(None);
                };
                let mut out = vec![0.0; m];
                linear_from_sorted(&self.y_sorted, self.sample.y_bar, gamma, &mut out);
                out
            }
            PredictorSpec::EmpiricalBest { posterior, draws } => {
                let laws = self.posterior_laws(posterior)?;
                let mut rng = key.rng(Purpose::Posterior, r);
                empirical_best_from_laws(&laws, draws, &mut rng)?.values
            }
            PredictorSpec::ShenLouis { posterior } => {
                let laws = self.posterior_laws(posterior)?;
                predict_shen_louis_laws(&laws)?.values
            }
        };
        Ok(Some(values))
    }
}

/// Result of the exhaustive search for the risk-optimal linear coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSearchResult {
    pub gamma_opt: f64,
    pub grid_step: f64,
    pub risk_at_opt: RiskEstimate,
    /// `(gamma, mean loss)` over the searched grid.
    pub risk_curve: Vec<(f64, f64)>,
    /// Delta-method standard error of `gamma_opt` as a function of the
    /// simulated samples.
    pub noise_band: f64,
    /// The searched interval.
    pub range: (f64, f64),
}

fn search_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    // rounding keeps printed coefficients free of representation noise
    let mut grid: Vec<f64> = (first..=last).map(|k| (k as f64 * step * 1e12).round() / 1e12).collect();
    if grid.is_empty() {
        grid.push(lo);
    }
    grid
}

fn search_from_quadratics(
    quads: &[Quadratic],
    grid_step: f64,
    range: (f64, f64),
    mc: &MonteCarlo,
    metric: Metric,
) -> Result<GammaSearchResult> {
    let n = quads.len() as f64;
    let sum_of = |f: fn(&Quadratic) -> f64| quads.iter().map(f).collect::<CompensatedSum>().value() / n;
    let (a, b, c) = (sum_of(|q| q.a), sum_of(|q| q.b), sum_of(|q| q.c));
    let mean = Quadratic { a, b, c };

    let risk_curve: Vec<(f64, f64)> =
        search_grid(range.0, range.1, grid_step).into_iter().map(|g| (g, mean.at(g))).collect();
    let &(gamma_opt, _) = risk_curve
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::Internal("empty search grid".into()))?;

    let losses: Vec<f64> = quads.iter().map(|q| q.at(gamma_opt)).collect();
    let est = McEstimate::from_values(&losses);
    let noise_band = if a > 0.0 {
        let influence: Vec<f64> = quads.iter().map(|q| -(q.b + gamma_opt * q.a) / a).collect();
        McEstimate::from_values(&influence).std_error
    } else {
        0.0
    };
    Ok(GammaSearchResult {
        gamma_opt,
        grid_step,
        risk_at_opt: RiskEstimate {
            mean_loss: est.mean,
            std_error: est.std_error,
            replications: quads.len(),
            seed: mc.seed,
            predictor: PredictorSpec::Linear(GammaRule::SearchOptimal),
            metric,
            gamma_used: Some(gamma_opt),
        },
        risk_curve,
        noise_band,
        range,
    })
}

/// Per-replicate losses of several predictors under common random numbers.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub specs: Vec<PredictorSpec>,
    pub metrics: Vec<Metric>,
    pub replications: usize,
    pub seed: u64,
    /// `losses[s * metrics.len() + k][r]`.
    losses: Vec<Vec<f64>>,
    /// Present when a searched linear coefficient was requested.
    pub gamma_search: Option<GammaSearchResult>,
}

impl Evaluation {
    fn index(&self, spec: usize, metric: usize) -> usize {
        spec * self.metrics.len() + metric
    }

    pub fn losses(&self, spec: usize, metric: usize) -> &[f64] {
        &self.losses[self.index(spec, metric)]
    }

    pub fn estimate(&self, spec: usize, metric: usize) -> RiskEstimate {
        let e = McEstimate::from_values(self.losses(spec, metric));
        let gamma_used = match self.specs[spec] {
            PredictorSpec::Linear(GammaRule::SearchOptimal) => self.gamma_search.as_ref().map(|g| g.gamma_opt),
            _ => None,
        };
        RiskEstimate {
            mean_loss: e.mean,
            std_error: e.std_error,
            replications: self.replications,
            seed: self.seed,
            predictor: self.specs[spec],
            metric: self.metrics[metric],
            gamma_used,
        }
    }

    /// Paired difference of mean losses, `(a) - (b)`, with its joint
    /// standard error.
    pub fn difference(&self, a: (usize, usize), b: (usize, usize)) -> McEstimate {
        let d: Vec<f64> = self.losses(a.0, a.1).iter().zip(self.losses(b.0, b.1)).map(|(x, y)| x - y).collect();
        McEstimate::from_values(&d)
    }
}

/// Evaluates every `(spec, metric)` pair on the same replicates. A searched
/// linear coefficient minimizes total ordered loss over `[0, 1]` on a
/// 0.001 grid, using these same replicates.
pub fn evaluate(
    config: &ModelConfig,
    specs: &[PredictorSpec],
    metrics: &[Metric],
    mc: &MonteCarlo,
) -> Result<Evaluation> {
    config.validate()?;
    mc.validate()?;
    if specs.is_empty() || metrics.is_empty() {
        return Err(invalid("need at least one predictor and one metric"));
    }
    for s in specs {
        s.validate()?;
    }
    let ranges = metrics.iter().map(|k| k.indices(config.m)).collect::<Result<Vec<_>>>()?;
    let searched = specs.iter().any(|s| matches!(s, PredictorSpec::Linear(GammaRule::SearchOptimal)));
    let key = mc.key();

    struct Out {
        losses: Vec<f64>,
        total: Quadratic,
        per_metric: Vec<Quadratic>,
    }

    let outs = mc.map(|r| {
        let rep = prepare(config, &key, r)?;
        let mut losses = Vec::with_capacity(specs.len() * metrics.len());
        for spec in specs {
            match rep.predict(spec, &key, r)? {
                Some(pred) => {
                    losses.extend(ranges.iter().map(|idx| squared_error(&pred, &rep.theta_sorted, idx.clone())))
                }
                None => losses.extend(std::iter::repeat_n(f64::NAN, metrics.len())),
            }
        }
        let (total, per_metric) = if searched {
            let q =
                |idx: std::ops::Range<usize>| Quadratic::new(&rep.y_sorted, rep.sample.y_bar, &rep.theta_sorted, idx);
            (q(0..config.m), ranges.iter().map(|idx| q(idx.clone())).collect())
        } else {
            (Quadratic::default(), Vec::new())
        };
        Ok(Out { losses, total, per_metric })
    })?;

    let n_cols = specs.len() * metrics.len();
    let mut losses: Vec<Vec<f64>> = (0..n_cols).map(|_| Vec::with_capacity(outs.len())).collect();
    for out in &outs {
        for (col, &v) in losses.iter_mut().zip(&out.losses) {
            col.push(v);
        }
    }

    let gamma_search = if searched {
        let totals: Vec<Quadratic> = outs.iter().map(|o| o.total).collect();
        let search = search_from_quadratics(&totals, 0.001, (0.0, 1.0), mc, Metric::TotalOrderedLoss)?;
        for (s, spec) in specs.iter().enumerate() {
            if matches!(spec, PredictorSpec::Linear(GammaRule::SearchOptimal)) {
                for k in 0..metrics.len() {
                    losses[s * metrics.len() + k] = outs.iter().map(|o| o.per_metric[k].at(search.gamma_opt)).collect();
                }
            }
        }
        Some(search)
    } else {
        None
    };

    Ok(Evaluation {
        specs: specs.to_vec(),
        metrics: metrics.to_vec(),
        replications: mc.replications,
        seed: mc.seed,
        losses,
        gamma_search,
    })
}

/// Mean total ordered loss of one predictor.
pub fn estimate_risk(config: &ModelConfig, spec: PredictorSpec, mc: &MonteCarlo) -> Result<RiskEstimate> {
    Ok(evaluate(config, &[spec], &[Metric::TotalOrderedLoss], mc)?.estimate(0, 0))
}

/// Mean squared error of the `i`-th smallest component (1-based).
pub fn mse_component(config: &ModelConfig, spec: PredictorSpec, i: usize, mc: &MonteCarlo) -> Result<RiskEstimate> {
    Ok(evaluate(config, &[spec], &[Metric::MseComponent(i)], mc)?.estimate(0, 0))
}

fn quadratics(config: &ModelConfig, metric: Metric, mc: &MonteCarlo) -> Result<Vec<Quadratic>> {
    config.validate()?;
    mc.validate()?;
    let idx = metric.indices(config.m)?;
    let key = mc.key();
    mc.map(|r| {
        let mut rng = key.rng(Purpose::Data, r);
        let s = draw_sample(config, &mut rng)?;
        let theta = order_statistics(&s.theta)?;
        let y = order_statistics(&s.y)?;
        Ok(Quadratic::new(&y, s.y_bar, &theta, idx.clone()))
    })
}

/// Exhaustive grid search over `[0, 1]` for the coefficient minimizing the
/// total ordered loss of the linear predictor.
pub fn search_gamma_opt(config: &ModelConfig, grid_step: f64, mc: &MonteCarlo) -> Result<GammaSearchResult> {
    search_gamma_opt_in(config, grid_step, (0.0, 1.0), Metric::TotalOrderedLoss, mc)
}

/// As [`search_gamma_opt`] over `range` and for any metric.
pub fn search_gamma_opt_in(
    config: &ModelConfig,
    grid_step: f64,
    range: (f64, f64),
    metric: Metric,
    mc: &MonteCarlo,
) -> Result<GammaSearchResult> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(invalid(format!("grid step must lie in (0, 1], got {grid_step}")));
    }
    if !(0.0 <= range.0 && range.0 <= range.1 && range.1 <= 1.0) {
        return Err(invalid(format!("search range must satisfy 0 <= lo <= hi <= 1, got {range:?}")));
    }
    let quads = quadratics(config, metric, mc)?;
    search_from_quadratics(&quads, grid_step, range, mc, metric)
}

/// Monte-Carlo estimate of `E sum_i theta_(i) y_(i)`.
pub fn cross_moment(config: &ModelConfig, mc: &MonteCarlo) -> Result<McEstimate> {
    config.validate()?;
    mc.validate()?;
    let key = mc.key();
    let values = mc.map(|r| {
        let mut rng = key.rng(Purpose::Data, r);
        let s = draw_sample(config, &mut rng)?;
        let theta = order_statistics(&s.theta)?;
        let y = order_statistics(&s.y)?;
        Ok(theta.iter().zip(&y).map(|(t, v)| t * v).collect::<CompensatedSum>().value())
    })?;
    Ok(McEstimate::from_values(&values))
}

/// Centre of the unordered shrinkage predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkTarget {
    /// The true mean `mu`.
    KnownMean,
    SampleMean,
}

/// Risk of `gamma y_i + (1 - gamma) c` for the unsorted `theta_i`.
pub fn unordered_risk(config: &ModelConfig, gamma: f64, target: ShrinkTarget, mc: &MonteCarlo) -> Result<McEstimate> {
    config.validate()?;
    mc.validate()?;
    let key = mc.key();
    let values = mc.map(|r| {
        let mut rng = key.rng(Purpose::Data, r);
        let s = draw_sample(config, &mut rng)?;
        let c = match target {
            ShrinkTarget::KnownMean => config.mu,
            ShrinkTarget::SampleMean => s.y_bar,
        };
        Ok(s.y
            .iter()
            .zip(&s.theta)
            .map(|(v, t)| (gamma * v + (1.0 - gamma) * c - t).powi(2))
            .collect::<CompensatedSum>()
            .value())
    })?;
    Ok(McEstimate::from_values(&values))
}

/// Per-replicate ordered and unordered losses of the linear predictor.
pub fn linear_loss_pairs(config: &ModelConfig, gamma: f64, mc: &MonteCarlo) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    mc.validate()?;
    let key = mc.key();
    mc.map(|r| {
        let mut rng = key.rng(Purpose::Data, r);
        let s = draw_sample(config, &mut rng)?;
        let theta = order_statistics(&s.theta)?;
        let y = order_statistics(&s.y)?;
        let mut pred = vec![0.0; y.len()];
        linear_from_sorted(&y, s.y_bar, gamma, &mut pred);
        let ordered = squared_error(&pred, &theta, 0..y.len());
        let unordered =
            s.y.iter()
                .zip(&s.theta)
                .map(|(v, t)| (gamma * v + (1.0 - gamma) * s.y_bar - t).powi(2))
                .collect::<CompensatedSum>()
                .value();
        Ok((ordered, unordered))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory;
    use proptest::prelude::*;

    fn mc(reps: usize, seed: u64) -> MonteCarlo {
        MonteCarlo::new(reps, seed)
    }

    #[test]
    fn ordered_loss_examples() {
        assert_eq!(ordered_loss(&[-1.0, 1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(ordered_loss(&[0.0, 0.0], &[-1.0, 1.0]).unwrap(), 2.0);
        assert!(ordered_loss(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn metric_labels() {
        for m in [Metric::TotalOrderedLoss, Metric::MseMax, Metric::MseComponent(3)] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("mse".parse::<Metric>().is_err());
    }

    #[test]
    fn direct_equals_linear_one() {
        let c = ModelConfig::normal(10, 1.0, 2.0);
        let specs = [PredictorSpec::Direct, PredictorSpec::Linear(GammaRule::Fixed(1.0))];
        let e = evaluate(&c, &specs, &[Metric::TotalOrderedLoss], &mc(200, 3)).unwrap();
        assert_eq!(e.losses(0, 0), e.losses(1, 0));
    }

    #[test]
    fn components_add_to_total() {
        let c = ModelConfig::normal(4, 1.0, 1.0);
        let metrics: Vec<Metric> =
            std::iter::once(Metric::TotalOrderedLoss).chain((1..=4).map(Metric::MseComponent)).collect();
        let specs = [PredictorSpec::Linear(GammaRule::SqrtStar), PredictorSpec::Linear(GammaRule::SearchOptimal)];
        let e = evaluate(&c, &specs, &metrics, &mc(300, 4)).unwrap();
        for s in 0..2 {
            let total = e.estimate(s, 0).mean_loss;
            let parts: f64 = (1..=4).map(|k| e.estimate(s, k).mean_loss).sum();
            assert!((total - parts).abs() < 1e-9 * total);
        }
        assert!(mse_component(&c, PredictorSpec::Direct, 5, &mc(10, 1)).is_err());
    }

    #[test]
    fn deterministic_across_workers() {
        let c = ModelConfig::normal(20, 1.0, 1.5);
        let specs = [
            PredictorSpec::Linear(GammaRule::Star),
            PredictorSpec::empirical_best().with_posterior(PosteriorAssumption::MatchTrue, 50),
        ];
        let one = evaluate(&c, &specs, &[Metric::TotalOrderedLoss, Metric::MseMax], &mc(64, 9)).unwrap();
        for w in [2, 8] {
            let many =
                evaluate(&c, &specs, &[Metric::TotalOrderedLoss, Metric::MseMax], &mc(64, 9).with_workers(w)).unwrap();
            assert_eq!(one.losses, many.losses);
        }
    }

    #[test]
    fn bayes_risk_of_unordered_posterior_mean() {
        let (m, g) = (10, 0.4);
        let c = ModelConfig::normal(m, 1.0, 1.0).with_gamma_star(1.0, g).unwrap();
        let r = unordered_risk(&c, g, ShrinkTarget::KnownMean, &mc(20_000, 5)).unwrap();
        let exact = m as f64 * g * c.sigma_e2_eff();
        assert!((r.mean - exact).abs() < 3.0 * r.std_error, "{} vs {exact}", r.mean);
    }

    #[test]
    fn search_returns_curve_minimum() {
        let c = ModelConfig::normal(5, 1.0, 1.0).with_gamma_star(1.0, 0.5).unwrap();
        let s = search_gamma_opt(&c, 0.001, &mc(2000, 6)).unwrap();
        assert_eq!(s.risk_curve.len(), 1001);
        let min = s.risk_curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let at = s.risk_curve.iter().find(|p| p.0 == s.gamma_opt).unwrap().1;
        assert_eq!(at, min);
        assert!(s.gamma_opt > 0.0 && s.gamma_opt < 1.0);
        // convex: decreasing then increasing
        let k = s.risk_curve.iter().position(|p| p.0 == s.gamma_opt).unwrap();
        assert!(s.risk_curve[..=k].windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(s.risk_curve[k..].windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(s.noise_band > 0.0);
    }

    #[test]
    fn search_with_exact_data_picks_one() {
        let c = ModelConfig::normal(5, 1.0, 0.0);
        let s = search_gamma_opt(&c, 0.001, &mc(50, 7)).unwrap();
        assert_eq!(s.gamma_opt, 1.0);
    }

    #[test]
    fn quadratic_matches_direct_loss() {
        let c = ModelConfig::normal(30, 1.0, 2.0);
        let e = evaluate(
            &c,
            &[PredictorSpec::Linear(GammaRule::SearchOptimal), PredictorSpec::Linear(GammaRule::Fixed(0.5))],
            &[Metric::TotalOrderedLoss],
            &mc(100, 8),
        )
        .unwrap();
        let g = e.gamma_search.as_ref().unwrap().gamma_opt;
        let direct =
            evaluate(&c, &[PredictorSpec::Linear(GammaRule::Fixed(g))], &[Metric::TotalOrderedLoss], &mc(100, 8))
                .unwrap();
        for (a, b) in e.losses(0, 0).iter().zip(direct.losses(0, 0)) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
        assert_eq!(e.estimate(0, 0).gamma_used, Some(g));
    }

    #[test]
    fn cross_moment_inside_lemma_bounds() {
        for &(m, g) in &[(2usize, 0.3), (5, 0.7), (20, 0.5)] {
            let c = ModelConfig::normal(m, 1.0, 1.0).with_gamma_star(1.0, g).unwrap();
            let est = cross_moment(&c, &mc(4000, 10)).unwrap();
            let (lo, hi) = theory::lemma1_bounds(m, 0.0, 1.0, c.sigma_e2_eff()).unwrap();
            assert!(est.mean >= lo - 3.0 * est.std_error && est.mean <= hi + 3.0 * est.std_error);
        }
        let exact = ModelConfig::normal(6, 1.0, 0.0);
        let est = cross_moment(&exact, &mc(20_000, 11)).unwrap();
        assert!((est.mean - 6.0).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn unknown_variance_modes_run() {
        let mut c = ModelConfig::normal(30, 1.0, 5.0);
        c.n = 15;
        c.sigma_e2 = 15.0;
        for mode in [VarianceMode::UnknownU, VarianceMode::UnknownBoth] {
            c.variance_mode = mode;
            let specs = [
                PredictorSpec::Linear(GammaRule::Star),
                PredictorSpec::Linear(GammaRule::SqrtStar),
                PredictorSpec::empirical_best().with_posterior(PosteriorAssumption::MatchTrue, 20),
                PredictorSpec::shen_louis(),
            ];
            let e = evaluate(&c, &specs, &[Metric::TotalOrderedLoss], &mc(50, 12)).unwrap();
            for s in 0..specs.len() {
                assert!(e.estimate(s, 0).mean_loss.is_finite());
            }
        }
    }

    #[test]
    fn non_normal_effects_run_with_both_assumptions() {
        for f in [DistKind::Laplace, DistKind::LocationExp] {
            let mut c = ModelConfig::normal(20, 1.0, 1.0);
            c.f_dist = f;
            let specs = [
                PredictorSpec::EmpiricalBest { posterior: PosteriorAssumption::MatchTrue, draws: 20 },
                PredictorSpec::EmpiricalBest { posterior: PosteriorAssumption::ForceNormal, draws: 20 },
                PredictorSpec::ShenLouis { posterior: PosteriorAssumption::MatchTrue },
                PredictorSpec::ShenLouis { posterior: PosteriorAssumption::ForceNormal },
            ];
            let e = evaluate(&c, &specs, &[Metric::TotalOrderedLoss], &mc(30, 13)).unwrap();
            for s in 0..specs.len() {
                assert!(e.estimate(s, 0).mean_loss.is_finite());
            }
        }
    }

    #[test]
    fn rejects_bad_runs() {
        let c = ModelConfig::normal(5, 1.0, 1.0);
        assert!(estimate_risk(&c, PredictorSpec::Direct, &mc(1, 0)).is_err());
        assert!(search_gamma_opt(&c, 0.0, &mc(10, 0)).is_err());
        assert!(search_gamma_opt_in(&c, 0.01, (0.5, 0.2), Metric::TotalOrderedLoss, &mc(10, 0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn loss_is_homogeneous(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..10), k in 0.1f64..10.0) {
            let mut pred: Vec<f64> = v.iter().map(|p| p.0).collect();
            pred.sort_by(f64::total_cmp);
            let theta: Vec<f64> = v.iter().map(|p| p.1).collect();
            let base = ordered_loss(&pred, &theta).unwrap();
            let sp: Vec<f64> = pred.iter().map(|x| x * k).collect();
            let st: Vec<f64> = theta.iter().map(|x| x * k).collect();
            let scaled = ordered_loss(&sp, &st).unwrap();
            prop_assert!((scaled - k * k * base).abs() <= 1e-9 * (1.0 + scaled));
        }

        #[test]
        fn sorting_dominates_per_replicate(seed in 0u64..1000, g in 0.0f64..=1.0) {
            let c = ModelConfig::normal(8, 1.0, 1.0);
            for (ordered, unordered) in linear_loss_pairs(&c, g, &mc(20, seed)).unwrap() {
                prop_assert!(ordered <= unordered + 1e-12 * (1.0 + unordered));
            }
        }
    }
}
