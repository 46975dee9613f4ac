use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use orderfx::experiments::gamma_grid;
use orderfx::{DistKind, Metric, PosteriorAssumption, PredictorSpec, VarianceMode};

#[derive(Debug, Parser)]
#[command(
    name = "orderfx",
    version,
    about = "Simulate predictors of ordered small-area effects",
    after_help = "Every flag can also be set in a --config file as `flag-name = value`; \
                  flags given on the command line take precedence."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a figure preset (fig1, fig2, fig3, fig1S, fig2S, fig3S).
    #[command(args_override_self = true)]
    Figure {
        id: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a scenario described by flags.
    #[command(args_override_self = true)]
    Sweep {
        #[command(flatten)]
        opts: Opts,
    },
    /// Print closed-form quantities.
    #[command(args_override_self = true)]
    Theory {
        function: TheoryFn,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the invariant suite at reduced scale.
    #[command(args_override_self = true)]
    Selftest {
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryFn {
    /// psi(a), with its envelope bounds (needs --a).
    Psi,
    /// The two-area threshold c.
    C,
    /// Dominance thresholds on gamma* for --m areas.
    Thresholds,
    /// Bracket for the optimal gamma (needs --gamma-star).
    Bracket,
    /// Optimal gamma for two normal areas (needs --gamma-star).
    GammaOptM2,
    /// Polynomial approximation of the optimal gamma (needs --gamma-star).
    Approx,
}

/// A `lo:hi:step` grid of gamma* values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
            .collect::<Result<_, _>>()?;
        let [lo, hi, step] = parts[..] else {
            return Err(format!("expected lo:hi:step, got '{s}'"));
        };
        gamma_grid(lo, hi, step).map(Grid).map_err(|e| e.to_string())
    }
}

/// Flags shared by every command; each command reads the ones it needs.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Number of areas.
    #[arg(long)]
    pub m: Option<usize>,
    /// Observations per area.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grand mean.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Variance of the area effects.
    #[arg(long)]
    pub sigma_u2: Option<f64>,
    /// Error variance of one observation.
    #[arg(long)]
    pub sigma_e2: Option<f64>,
    /// Single gamma* value; sigma-e2 is solved from it.
    #[arg(long)]
    pub gamma_star: Option<f64>,
    /// Grid of gamma* values as lo:hi:step.
    #[arg(long, value_name = "LO:HI:STEP")]
    pub gamma_star_grid: Option<Grid>,
    /// Distribution of the area effects: normal|laplace|locexp.
    #[arg(long)]
    pub f: Option<DistKind>,
    /// Distribution of the sampling errors: normal|locexp.
    #[arg(long)]
    pub g: Option<DistKind>,
    /// known|unknown-u|unknown-both.
    #[arg(long)]
    pub variance_mode: Option<VarianceMode>,
    /// Comma list of direct, linear@star, linear@sqrt_star, linear@approx,
    /// linear@opt, linear@<gamma>, empirical_best, shen_louis.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub predictors: Option<Vec<PredictorSpec>>,
    /// Comma list of total_ordered_loss, mse_max, mse@<i>.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub metrics: Option<Vec<Metric>>,
    /// Posterior used by the posterior-based predictors: match|force-normal.
    #[arg(long)]
    pub posterior: Option<PosteriorAssumption>,
    /// Posterior draws per replicate for the empirical best predictor.
    #[arg(long)]
    pub draws_k: Option<usize>,
    /// Monte-Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed.
    #[arg(long, env = "ORDERFX_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Multiplier on preset replication counts.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of `flag-name = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Argument of psi.
    #[arg(long)]
    pub a: Option<f64>,
}
