//! Shared fixtures for the kernel benchmarks.

use orderfx::predictors::PosteriorModel;
use orderfx::stream::{Purpose, StreamKey};
use orderfx::{draw_sample, DistKind, ModelConfig, PosteriorLaw};

/// Known-variance normal model with `m` areas at the given `gamma*`.
pub fn model(m: usize, gamma_star: f64) -> ModelConfig {
    ModelConfig::normal(m, 1.0, 1.0).with_gamma_star(1.0, gamma_star).expect("valid fixture")
}

/// One reproducible vector of observations.
pub fn observations(config: &ModelConfig, seed: u64) -> Vec<f64> {
    let mut rng = StreamKey::new(seed, 0).rng(Purpose::Data, 0);
    draw_sample(config, &mut rng).expect("valid fixture").y
}

/// Sorted conditional laws of the effects under the true model.
pub fn laws(config: &ModelConfig, effect: DistKind, seed: u64) -> Vec<PosteriorLaw> {
    let y = observations(config, seed);
    let mu_hat = y.iter().sum::<f64>() / y.len() as f64;
    let model = PosteriorModel { effect, mu_hat, sigma_u2: config.sigma_u2, sigma_e2_eff: config.sigma_e2_eff() };
    model.sorted_laws(&y).expect("valid fixture")
}
