use std::io::{self, Write};

use orderfx::experiments::{run_scenario_with, write_csv, write_run, DEFAULT_SEED};
use orderfx::predictors::DEFAULT_DRAWS;
use orderfx::selftest::run_selftest;
use orderfx::{theory, Error, GammaRule, Metric, ModelConfig, PredictorSpec, Scenario, ScenarioRun};

use crate::args::{Opts, TheoryFn};

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn require(v: Option<f64>, flag: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("this function needs --{flag}")))
}

fn apply_posterior(predictors: Vec<PredictorSpec>, opts: &Opts) -> Vec<PredictorSpec> {
    if opts.posterior.is_none() && opts.draws_k.is_none() {
        return predictors;
    }
    predictors
        .into_iter()
        .map(|p| {
            let (posterior, draws) = match p {
                PredictorSpec::EmpiricalBest { posterior, draws } => (posterior, draws),
                PredictorSpec::ShenLouis { posterior } => (posterior, DEFAULT_DRAWS),
                _ => return p,
            };
            p.with_posterior(opts.posterior.unwrap_or(posterior), opts.draws_k.unwrap_or(draws))
        })
        .collect()
}

fn emit(s: &Scenario, opts: &Opts) -> Result<ScenarioRun, Failure> {
    let workers = opts.workers.unwrap_or(0);
    let verbose = opts.out.is_some();
    let run = run_scenario_with(s, workers, |done, total| {
        if verbose {
            eprint!("\r{}: {done}/{total} grid points", s.id);
        }
    })?;
    match &opts.out {
        Some(path) => {
            let side = write_run(&run, path)?;
            eprintln!("\rwrote {} rows to {}", run.rows.len(), path.display());
            if let Some(side) = side {
                eprintln!("wrote {} searched coefficients to {}", run.gamma_rows.len(), side.display());
            }
        }
        None => write_csv(&run.rows, io::stdout().lock())?,
    }
    Ok(run)
}

pub fn figure(id: &str, opts: &Opts) -> Outcome {
    let scale = opts.scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Failure::Usage(format!("--scale must be positive, got {scale}")));
    }
    let mut s = orderfx::builtin_scenario(id, scale)?;
    if let Some(reps) = opts.reps {
        s.replications = reps;
    }
    if let Some(seed) = opts.seed {
        s.master_seed = seed;
    }
    if let Some(grid) = &opts.gamma_star_grid {
        s.gamma_star_grid = grid.0.clone();
    }
    s.predictors = apply_posterior(s.predictors, opts);
    emit(&s, opts).map(|_| ())
}

fn sweep_scenario(opts: &Opts) -> Result<Scenario, Failure> {
    let mut c = ModelConfig::normal(opts.m.unwrap_or(100), opts.sigma_u2.unwrap_or(1.0), opts.sigma_e2.unwrap_or(1.0));
    c.n = opts.n.unwrap_or(1);
    c.mu = opts.mu.unwrap_or(0.0);
    c.f_dist = opts.f.unwrap_or(c.f_dist);
    c.g_dist = opts.g.unwrap_or(c.g_dist);
    c.variance_mode = opts.variance_mode.unwrap_or(c.variance_mode);
    c.validate()?;
    let grid = match (&opts.gamma_star_grid, opts.gamma_star) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give --gamma-star or --gamma-star-grid, not both".into())),
        (Some(grid), None) => grid.0.clone(),
        (None, Some(g)) => vec![g],
        (None, None) => vec![c.gamma_star()],
    };
    let predictors = opts.predictors.clone().unwrap_or_else(|| {
        vec![
            PredictorSpec::Linear(GammaRule::Star),
            PredictorSpec::Linear(GammaRule::SqrtStar),
            PredictorSpec::Linear(GammaRule::SearchOptimal),
            PredictorSpec::empirical_best(),
        ]
    });
    let s = Scenario {
        id: "sweep".into(),
        variants: vec![c],
        gamma_star_grid: grid,
        predictors: apply_posterior(predictors, opts),
        metrics: opts.metrics.clone().unwrap_or_else(|| vec![Metric::TotalOrderedLoss]),
        replications: opts.reps.unwrap_or(1000),
        master_seed: opts.seed.unwrap_or(DEFAULT_SEED),
    };
    s.validate()?;
    Ok(s)
}

pub fn sweep(opts: &Opts) -> Outcome {
    let s = sweep_scenario(opts)?;
    let run = emit(&s, opts)?;
    for g in &run.gamma_rows {
        eprintln!(
            "gamma*={}: gamma_opt={} (+-{:.4}), bracket [{:.4}, {:.4}], sqrt(gamma*)={:.4}",
            g.gamma_star,
            g.gamma_opt,
            g.noise_band,
            g.bracket_low,
            g.bracket_high,
            g.gamma_star.sqrt()
        );
    }
    Ok(())
}

pub fn theory(function: TheoryFn, opts: &Opts) -> Outcome {
    let mut out = io::stdout().lock();
    let m = opts.m.unwrap_or(2);
    match function {
        TheoryFn::Psi => {
            let a = require(opts.a, "a")?;
            let (lo, hi) = theory::rho_bounds(a)?;
            writeln!(out, "psi({a}) = {}", theory::psi(a)?)?;
            writeln!(out, "bounds = [{lo}, {hi}]")?;
        }
        TheoryFn::C => writeln!(out, "c = {}", theory::threshold_c()?)?,
        TheoryFn::Thresholds => {
            writeln!(out, "all gamma beat direct for gamma* <= {}", theory::corollary1_threshold(m)?)?;
            writeln!(out, "gamma = gamma* beats direct for gamma* <= {}", theory::corollary2_threshold(m)?)?;
            if let Some(g) = opts.gamma_star {
                writeln!(
                    out,
                    "gamma beats direct for gamma >= {} at gamma* = {g}",
                    theory::theorem3_lower_gamma(m, g)?
                )?;
            }
        }
        TheoryFn::Bracket => {
            let g = require(opts.gamma_star, "gamma-star")?;
            let b = theory::gamma_bracket(m, g)?;
            writeln!(out, "[{}, {}]", b.low, b.high)?;
        }
        TheoryFn::GammaOptM2 => {
            let g = require(opts.gamma_star, "gamma-star")?;
            writeln!(out, "{}", theory::gamma_opt_m2(g)?)?;
        }
        TheoryFn::Approx => {
            let g = require(opts.gamma_star, "gamma-star")?;
            let a = theory::gamma_approx(m, g)?;
            let note = if a.outside_fit { " (m beyond the fitted range; sqrt(gamma*))" } else { "" };
            writeln!(out, "{}{note}", a.gamma)?;
        }
    }
    Ok(())
}

pub fn selftest() -> Outcome {
    let (checks, secs) = run_selftest();
    let mut out = io::stdout().lock();
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail)?;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(out, "{passed}/{} checks passed in {secs:.1}s", checks.len())?;
    if passed == checks.len() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} selftest checks failed", checks.len() - passed)))
    }
}
