//! Fast invariant checks at reduced scale, shared by the command-line
//! `selftest` and the acceptance suite.

use std::time::Instant;

use crate::error::Result;
use crate::experiments::{builtin_scenario, run_scenario, write_csv};
use crate::model::ModelConfig;
use crate::numeric::{normal, sum};
use crate::posterior::{kella_conditional_means, normal_posterior};
use crate::predictors::{
    g_bar, predict_empirical_best_sampled, predict_shen_louis, PredictorSpec, SHEN_LOUIS_RESIDUAL,
};
use crate::risk::{cross_moment, linear_loss_pairs, search_gamma_opt, MonteCarlo};
use crate::stream::{Purpose, StreamKey};
use crate::theory;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match body() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn psi_envelope() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let a = i as f64 * 0.05;
        let p = theory::psi(a)?;
        let (lo, hi) = theory::rho_bounds(a)?;
        worst = worst.max(lo - p).max(p - hi);
    }
    Ok((worst <= 1e-12, format!("largest bound violation {worst:e}")))
}

fn kella_identity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for &(y1, y2, mu, g) in &[(0.3, -1.0, 0.2, 0.3), (4.0, 4.5, -1.0, 0.8), (-2.0, 1.0, 0.0, 0.05)] {
        let (lo, hi) = kella_conditional_means(y1, y2, mu, g, 1.7)?;
        worst = worst.max((lo + hi - g * (y1 + y2) - 2.0 * (1.0 - g) * mu).abs());
    }
    Ok((worst < 1e-12, format!("sum identity residual {worst:e}")))
}

fn empirical_best_two_areas() -> Result<(bool, String)> {
    let (y, mu, g, s2) = ([0.8, -0.4], 0.2, 0.5, 1.0);
    let (lo, hi) = kella_conditional_means(y[0], y[1], mu, g, s2)?;
    let mut rng = StreamKey::new(1, 1).rng(Purpose::Posterior, 0);
    let r = predict_empirical_best_sampled(&y, |v| normal_posterior(v, mu, g, s2), 100_000, &mut rng)?;
    let se = r.std_errors.unwrap_or_default();
    let z = ((r.values[0] - lo) / se[0]).abs().max(((r.values[1] - hi) / se[1]).abs());
    Ok((z < 4.0, format!("largest |z| {z:.2}")))
}

fn shen_louis_residuals() -> Result<(bool, String)> {
    let mut rng = StreamKey::new(2, 2).rng(Purpose::Data, 0);
    let y: Vec<f64> = (0..100).map(|_| 2.0 * normal::inverse_cdf_draw(&mut rng)).collect();
    let y_bar = sum(y.iter().copied()) / 100.0;
    let r = predict_shen_louis(&y, y_bar, 0.6, 1.0)?;
    let mut worst: f64 = 0.0;
    for (j, v) in r.values.iter().enumerate() {
        let p = (2 * j + 1) as f64 / 200.0;
        worst = worst.max((g_bar(*v, &y, y_bar, 0.6, 1.0)? - p).abs());
    }
    let increasing = r.values.windows(2).all(|w| w[0] < w[1]);
    Ok((worst <= SHEN_LOUIS_RESIDUAL && increasing, format!("largest residual {worst:e}")))
}

fn rearrangement() -> Result<(bool, String)> {
    let c = ModelConfig::normal(12, 1.0, 1.0);
    let mut violations = 0;
    for g in [0.0, 0.3, 0.7, 1.0] {
        for (ordered, unordered) in linear_loss_pairs(&c, g, &MonteCarlo::new(500, 3))? {
            violations += (ordered > unordered + 1e-12 * (1.0 + unordered)) as usize;
        }
    }
    Ok((violations == 0, format!("{violations} replicates where sorting hurt")))
}

fn bracket_contains_search() -> Result<(bool, String)> {
    let c = ModelConfig::normal(10, 1.0, 1.0).with_gamma_star(1.0, 0.5)?;
    let s = search_gamma_opt(&c, 0.001, &MonteCarlo::new(20_000, 4))?;
    let b = theory::gamma_bracket(10, 0.5)?;
    let slack = s.grid_step + 3.0 * s.noise_band;
    let ok = s.gamma_opt >= b.low - slack && s.gamma_opt <= b.high + slack;
    Ok((ok, format!("gamma_opt {} in [{:.4}, {:.4}] +- {slack:.4}", s.gamma_opt, b.low, b.high)))
}

fn lemma_bounds() -> Result<(bool, String)> {
    let c = ModelConfig::normal(5, 1.0, 1.0);
    let e = cross_moment(&c, &MonteCarlo::new(20_000, 5))?;
    let (lo, hi) = theory::lemma1_bounds(5, 0.0, 1.0, 1.0)?;
    let ok = e.mean >= lo - 3.0 * e.std_error && e.mean <= hi + 3.0 * e.std_error;
    Ok((ok, format!("{:.4} in [{lo:.4}, {hi:.4}]", e.mean)))
}

fn determinism() -> Result<(bool, String)> {
    let mut s = builtin_scenario("fig2S", 0.02)?;
    s.gamma_star_grid = vec![0.25, 0.75];
    s.predictors = s.predictors.into_iter().map(|p| p.with_posterior(Default::default(), 20)).collect();
    s.predictors.push(PredictorSpec::shen_louis());
    let render = |workers| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&run_scenario(&s, workers)?.rows, &mut buf).map_err(|e| crate::Error::Internal(e.to_string()))?;
        Ok(buf)
    };
    let one = render(1)?;
    let same = [2, 4].iter().map(|&w| render(w)).collect::<Result<Vec<_>>>()?.iter().all(|b| *b == one);
    Ok((same, format!("{} bytes compared across 1, 2 and 4 workers", one.len())))
}

/// Runs every check and reports how long the suite took in seconds.
pub fn run_selftest() -> (Vec<Check>, f64) {
    let start = Instant::now();
    let checks = vec![
        check("psi within its envelope", psi_envelope),
        check("two-area conditional means add up", kella_identity),
        check("sampled empirical best matches closed form", empirical_best_two_areas),
        check("quantile predictor residuals", shen_louis_residuals),
        check("sorting never increases loss", rearrangement),
        check("searched gamma inside its bracket", bracket_contains_search),
        check("cross moment inside its bounds", lemma_bounds),
        check("output independent of worker count", determinism),
    ];
    (checks, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let (checks, _) = run_selftest();
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
