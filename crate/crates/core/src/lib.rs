//! Prediction of ordered random effects in the one-way model
//! `y_ij = mu + u_i + e_ij`.
//!
//! Covers data generation, conditional laws of the area effects, the direct,
//! linear, empirical-best and quantile predictors of the sorted effects,
//! moment estimators of the variance components, closed-form results for the
//! shrinkage coefficient, and a deterministic parallel Monte-Carlo engine.

pub mod error;
pub mod experiments;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod predictors;
pub mod risk;
pub mod selftest;
pub mod stream;
pub mod theory;
pub mod variance;

pub use error::{Error, Result};
pub use experiments::{builtin_scenario, builtin_scenarios, run_scenario, GammaRow, Row, Scenario, ScenarioRun};
pub use model::{draw_sample, DistKind, ModelConfig, Sample, VarianceMode};
pub use posterior::{PosteriorKind, PosteriorLaw};
pub use predictors::{GammaRule, PosteriorAssumption, PredictionResult, PredictorSpec};
pub use risk::{GammaSearchResult, McEstimate, Metric, MonteCarlo, RiskEstimate};
pub use theory::{GammaApprox, GammaBracket};
pub use variance::VarianceEstimate;
