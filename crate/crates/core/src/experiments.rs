//! Scenario presets for the simulation figures and the runner that turns a
//! scenario into CSV rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::model::{DistKind, ModelConfig, VarianceMode};
use crate::predictors::{GammaRule, PosteriorAssumption, PredictorSpec};
use crate::risk::{evaluate, Metric, MonteCarlo};
use crate::stream::scenario_id;
use crate::theory;

/// Master seed of the presets.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const CSV_HEADER: &str =
    "scenario,m,n,f_dist,g_dist,variance_mode,gamma_star,predictor,metric,value,std_error,replications,seed";

pub const GAMMA_CSV_HEADER: &str = "scenario,m,n,f_dist,g_dist,variance_mode,gamma_star,gamma_opt,noise_band,\
bracket_low,bracket_high,gamma_approx,sqrt_gamma_star,replications,seed";

/// A set of simulation settings evaluated on a common `gamma*` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    /// Model templates; `sigma_e2` is back-solved from each grid value with
    /// `sigma_u2` held fixed.
    pub variants: Vec<ModelConfig>,
    pub gamma_star_grid: Vec<f64>,
    pub predictors: Vec<PredictorSpec>,
    pub metrics: Vec<Metric>,
    pub replications: usize,
    pub master_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(',') {
            return Err(invalid(format!("scenario id '{}' must be non-empty and comma-free", self.id)));
        }
        if self.variants.is_empty() || self.predictors.is_empty() || self.metrics.is_empty() {
            return Err(invalid("a scenario needs variants, predictors and metrics"));
        }
        if self.gamma_star_grid.is_empty() {
            return Err(invalid("empty gamma* grid"));
        }
        if !self.gamma_star_grid.iter().all(|&g| g > 0.0 && g < 1.0) {
            return Err(invalid("gamma* grid values must lie in (0, 1)"));
        }
        if !self.gamma_star_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("gamma* grid must be strictly increasing"));
        }
        for v in &self.variants {
            v.validate()?;
            if v.sigma_u2 <= 0.0 {
                return Err(invalid("scenario templates need sigma_u2 > 0"));
            }
        }
        for p in &self.predictors {
            p.validate()?;
        }
        if self.replications < 2 {
            return Err(invalid("need at least 2 replications"));
        }
        Ok(())
    }

    /// Number of rows [`run_scenario`] emits.
    pub fn row_count(&self) -> usize {
        self.variants.len() * self.gamma_star_grid.len() * self.predictors.len() * self.metrics.len()
    }

    fn stream_family(&self, variant: &ModelConfig) -> u64 {
        scenario_id(&format!(
            "{}/m={}/n={}/f={}/g={}/{}",
            self.id, variant.m, variant.n, variant.f_dist, variant.g_dist, variant.variance_mode
        ))
    }
}

/// `lo, lo + step, ..., hi`, each rounded to 10 decimals.
pub fn gamma_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo <= hi) {
        return Err(invalid(format!("bad grid {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10).collect())
}

/// The default grid 0.05, 0.10, ..., 0.95.
pub fn default_grid() -> Vec<f64> {
    gamma_grid(0.05, 0.95, 0.05).expect("constant grid is valid")
}

fn template(m: usize, n: usize, f: DistKind, g: DistKind, mode: VarianceMode) -> ModelConfig {
    let mut c = ModelConfig::normal(m, 1.0, 1.0);
    c.n = n;
    c.f_dist = f;
    c.g_dist = g;
    c.variance_mode = mode;
    c
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(2)
}

fn eb(posterior: PosteriorAssumption, draws: usize) -> PredictorSpec {
    PredictorSpec::EmpiricalBest { posterior, draws }
}

/// The figure presets with replication counts multiplied by `scale`.
pub fn builtin_scenarios(scale: f64) -> Vec<Scenario> {
    use DistKind::{Laplace, LocationExp, Normal};
    use PosteriorAssumption::{ForceNormal, MatchTrue};
    use VarianceMode::{Known, UnknownBoth, UnknownU};

    let both_metrics = vec![Metric::TotalOrderedLoss, Metric::MseMax];
    let star = PredictorSpec::Linear(GammaRule::Star);
    let sqrt_star = PredictorSpec::Linear(GammaRule::SqrtStar);
    let opt = PredictorSpec::Linear(GammaRule::SearchOptimal);
    let scenario =
        |id: &str, variants: Vec<ModelConfig>, predictors: Vec<PredictorSpec>, metrics: &Vec<Metric>, reps| Scenario {
            id: id.to_string(),
            variants,
            gamma_star_grid: default_grid(),
            predictors,
            metrics: metrics.clone(),
            replications: scaled(reps, scale),
            master_seed: DEFAULT_SEED,
        };

    vec![
        scenario(
            "fig1",
            vec![template(100, 15, Normal, Normal, UnknownBoth), template(30, 15, Normal, Normal, UnknownBoth)],
            vec![star, sqrt_star, eb(MatchTrue, 1000)],
            &both_metrics,
            1000,
        ),
        scenario(
            "fig2",
            vec![template(100, 1, Laplace, Normal, Known), template(100, 1, LocationExp, Normal, Known)],
            vec![star, opt, eb(MatchTrue, 100)],
            &both_metrics,
            100,
        ),
        scenario(
            "fig3",
            vec![template(100, 1, Laplace, Normal, Known), template(100, 1, LocationExp, Normal, Known)],
            vec![PredictorSpec::ShenLouis { posterior: ForceNormal }, sqrt_star, eb(ForceNormal, 1000)],
            &both_metrics,
            1000,
        ),
        scenario(
            "fig1S",
            [5, 10, 20, 100]
                .iter()
                .flat_map(|&m| [template(m, 1, Normal, Normal, Known), template(m, 1, Normal, LocationExp, Known)])
                .collect(),
            vec![opt],
            &vec![Metric::TotalOrderedLoss],
            1000,
        ),
        scenario(
            "fig2S",
            vec![template(100, 1, Normal, Normal, Known), template(30, 1, Normal, Normal, Known)],
            vec![star, opt, sqrt_star, eb(MatchTrue, 1000)],
            &both_metrics,
            1000,
        ),
        scenario(
            "fig3S",
            vec![template(100, 1, Normal, Normal, UnknownU), template(30, 1, Normal, Normal, UnknownU)],
            vec![star, sqrt_star, eb(MatchTrue, 1000)],
            &both_metrics,
            1000,
        ),
    ]
}

/// Looks up a preset by id.
pub fn builtin_scenario(id: &str, scale: f64) -> Result<Scenario> {
    builtin_scenarios(scale)
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| invalid(format!("unknown figure '{id}' (expected fig1|fig2|fig3|fig1S|fig2S|fig3S)")))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub f_dist: DistKind,
    pub g_dist: DistKind,
    pub variance_mode: VarianceMode,
    pub gamma_star: f64,
    pub predictor: PredictorSpec,
    pub metric: Metric,
    pub value: f64,
    pub std_error: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.m,
            self.n,
            self.f_dist,
            self.g_dist,
            self.variance_mode,
            self.gamma_star,
            self.predictor,
            self.metric,
            self.value,
            self.std_error,
            self.replications,
            self.seed
        )
    }
}

/// Searched optimal coefficient at one grid point, next to its bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub scenario: String,
    pub config: ModelConfig,
    pub gamma_star: f64,
    pub gamma_opt: f64,
    pub noise_band: f64,
    pub bracket_low: f64,
    pub bracket_high: f64,
    /// Fitted approximation, or `sqrt(gamma*)` beyond its range.
    pub gamma_approx: f64,
    pub replications: usize,
    pub seed: u64,
}

impl GammaRow {
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            c.m,
            c.n,
            c.f_dist,
            c.g_dist,
            c.variance_mode,
            self.gamma_star,
            self.gamma_opt,
            self.noise_band,
            self.bracket_low,
            self.bracket_high,
            self.gamma_approx,
            self.gamma_star.sqrt(),
            self.replications,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioRun {
    pub rows: Vec<Row>,
    /// Present for scenarios with a searched linear coefficient.
    pub gamma_rows: Vec<GammaRow>,
}

/// Runs every variant at every grid point. Output order is variant, grid
/// point, predictor, metric.
pub fn run_scenario(s: &Scenario, workers: usize) -> Result<ScenarioRun> {
    run_scenario_with(s, workers, |_, _| {})
}

/// As [`run_scenario`], calling `progress(done, total)` after each grid point.
pub fn run_scenario_with(s: &Scenario, workers: usize, mut progress: impl FnMut(usize, usize)) -> Result<ScenarioRun> {
    s.validate()?;
    let mut run = ScenarioRun::default();
    let total = s.variants.len() * s.gamma_star_grid.len();
    let mut done = 0;
    for variant in &s.variants {
        let mc = MonteCarlo::new(s.replications, s.master_seed)
            .with_scenario(s.stream_family(variant))
            .with_workers(workers);
        for &g in &s.gamma_star_grid {
            let config = variant.clone().with_gamma_star(variant.sigma_u2, g)?;
            let eval = evaluate(&config, &s.predictors, &s.metrics, &mc)?;
            for (p, spec) in s.predictors.iter().enumerate() {
                for (k, metric) in s.metrics.iter().enumerate() {
                    let est = eval.estimate(p, k);
                    run.rows.push(Row {
                        scenario: s.id.clone(),
                        m: config.m,
                        n: config.n,
                        f_dist: config.f_dist,
                        g_dist: config.g_dist,
                        variance_mode: config.variance_mode,
                        gamma_star: g,
                        predictor: *spec,
                        metric: *metric,
                        value: est.mean_loss,
                        std_error: est.std_error,
                        replications: s.replications,
                        seed: s.master_seed,
                    });
                }
            }
            if let Some(search) = &eval.gamma_search {
                let bracket = theory::gamma_bracket(config.m, g)?;
                run.gamma_rows.push(GammaRow {
                    scenario: s.id.clone(),
                    config: config.clone(),
                    gamma_star: g,
                    gamma_opt: search.gamma_opt,
                    noise_band: search.noise_band,
                    bracket_low: bracket.low,
                    bracket_high: bracket.high,
                    gamma_approx: theory::gamma_approx(config.m, g)?.gamma,
                    replications: s.replications,
                    seed: s.master_seed,
                });
            }
            done += 1;
            progress(done, total);
        }
    }
    Ok(run)
}

pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    out.flush()
}

pub fn write_gamma_csv<W: Write>(rows: &[GammaRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{GAMMA_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    out.flush()
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Path of the searched-coefficient table written next to `out`.
pub fn gamma_sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".gamma.csv");
    out.with_file_name(name)
}

/// Writes the main table to `path` and, when present, the searched
/// coefficients to its sidecar. Returns the sidecar path if one was written.
pub fn write_run(run: &ScenarioRun, path: &Path) -> Result<Option<PathBuf>> {
    let file = File::create(path).map_err(io_error(path))?;
    write_csv(&run.rows, BufWriter::new(file)).map_err(io_error(path))?;
    if run.gamma_rows.is_empty() {
        return Ok(None);
    }
    let side = gamma_sidecar_path(path);
    let file = File::create(&side).map_err(io_error(&side))?;
    write_gamma_csv(&run.gamma_rows, BufWriter::new(file)).map_err(io_error(&side))?;
    Ok(Some(side))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(id: &str) -> Scenario {
        let mut s = builtin_scenario(id, 0.01).unwrap();
        s.gamma_star_grid = vec![0.3, 0.7];
        for p in s.predictors.iter_mut() {
            if let PredictorSpec::EmpiricalBest { posterior, .. } = *p {
                *p = PredictorSpec::EmpiricalBest { posterior, draws: 20 };
            }
        }
        s
    }

    #[test]
    fn grid_values_are_clean() {
        let g = default_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[2], 0.15);
        assert_eq!(g[18], 0.95);
        assert_eq!(gamma_grid(0.1, 0.9, 0.1).unwrap().len(), 9);
        assert!(gamma_grid(0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn presets_match_protocols() {
        let all = builtin_scenarios(1.0);
        let ids: Vec<&str> = all.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["fig1", "fig2", "fig3", "fig1S", "fig2S", "fig3S"]);
        for s in &all {
            s.validate().unwrap();
        }
        let fig1 = &all[0];
        assert!(fig1.variants.iter().all(|v| v.variance_mode == VarianceMode::UnknownBoth && v.n == 15));
        assert_eq!(fig1.variants.iter().map(|v| v.m).collect::<Vec<_>>(), [100, 30]);
        let fig2 = &all[1];
        assert_eq!(fig2.replications, 100);
        assert!(fig2.predictors.contains(&eb(PosteriorAssumption::MatchTrue, 100)));
        let fig3 = &all[2];
        assert!(fig3.predictors.contains(&PredictorSpec::ShenLouis { posterior: PosteriorAssumption::ForceNormal }));
        assert_eq!(
            fig3.variants.iter().map(|v| v.f_dist).collect::<Vec<_>>(),
            [DistKind::Laplace, DistKind::LocationExp]
        );
        let fig1s = &all[3];
        assert!(fig1s.variants.iter().any(|v| v.g_dist == DistKind::LocationExp));
        assert_eq!(builtin_scenario("fig2S", 0.2).unwrap().replications, 200);
        assert!(builtin_scenario("fig9", 1.0).is_err());
    }

    #[test]
    fn row_count_matches_declaration() {
        let s = tiny("fig2S");
        let run = run_scenario(&s, 1).unwrap();
        assert_eq!(run.rows.len(), s.row_count());
        assert_eq!(run.gamma_rows.len(), s.variants.len() * s.gamma_star_grid.len());
        let mut k = 0;
        for v in &s.variants {
            for &g in &s.gamma_star_grid {
                for p in &s.predictors {
                    for metric in &s.metrics {
                        let r = &run.rows[k];
                        assert_eq!((r.m, r.gamma_star, r.predictor, r.metric), (v.m, g, *p, *metric));
                        k += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn csv_is_reproducible() {
        let s = tiny("fig3");
        let render = |workers| {
            let mut buf = Vec::new();
            write_csv(&run_scenario(&s, workers).unwrap().rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render(1);
        assert_eq!(a, render(1));
        assert_eq!(a, render(3));
        let mut lines = a.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 13);
        assert_eq!(first[0], "fig3");
        assert_eq!(first[7], "shen_louis");
    }

    #[test]
    fn sidecar_path() {
        assert_eq!(gamma_sidecar_path(Path::new("out/r.csv")), PathBuf::from("out/r.gamma.csv"));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut s = tiny("fig2S");
        s.gamma_star_grid = vec![0.5, 0.5];
        assert!(run_scenario(&s, 1).is_err());
        s.gamma_star_grid = vec![0.0, 0.5];
        assert!(s.validate().is_err());
    }
}
