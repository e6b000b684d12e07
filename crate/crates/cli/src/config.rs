//! Command-line flags, JSON config files and their resolution into a
//! validated [`RunConfig`]. Precedence: flags, then the config file, then
//! built-in defaults.

use std::env;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbint::codebook::DEFAULT_MAXIMIN_CANDIDATES;
use fbint::finite::DEFAULT_K_MAX;
use fbint::simulator::{Metric, DEFAULT_TRIALS};
use fbint::CodebookKind;
use serde::Deserialize;

use crate::presets::Figure;
use crate::table::{Destination, Format};

/// Directory for tables when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "FBINT_OUTPUT_DIR";

pub const DEFAULT_SIM_K_MAX: usize = 10;
pub const DEFAULT_RHO_DB: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(
    name = "fbint",
    version,
    about = "Optimal feedback interval for quantized MIMO beamforming over Gauss-Markov fading"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form interval-averaged power for K = 1..k-max (2 x Nr or Nt x 2).
    Analytic(FiniteArgs),
    /// Large-system rate difference for K = 1..k-max and its optimal K.
    LargeSystem(LargeArgs),
    /// Monte Carlo estimates for K = 1..k-max.
    Simulate(SimArgs),
    /// Optimal feedback interval from the closed form.
    OptimalK(FiniteArgs),
    /// Intervals where feeding back every K blocks beats every block.
    AfpRange(FiniteArgs),
    /// RVQ against Maximin codebooks, normalized power for K = 1..k-max.
    CompareCodebooks(SimArgs),
    /// Regenerate the table behind one of the preset figures (fig1..fig7).
    ReproduceFigure(FigureArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON config file; keys match the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file. Defaults to $FBINT_OUTPUT_DIR/<command>.<ext>, else stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct ShapeArgs {
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    /// Feedback bits per block.
    #[arg(long)]
    pub bits: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FiniteArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct LargeArgs {
    /// Receive-to-transmit antenna ratio; 0 selects the MISO limit.
    #[arg(long)]
    pub nr_bar: Option<f64>,
    /// Feedback bits per block per transmit antenna.
    #[arg(long)]
    pub b_bar: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long)]
    pub rho_db: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    pub codebook: Option<CodebookArg>,
    /// Random codebooks scored when building a Maximin codebook.
    #[arg(long)]
    pub candidates: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub id: Option<Figure>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricArg {
    AvgPower,
    AvgRate,
    RateDifference,
    NormalizedPower,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::AvgPower => Metric::AvgPower,
            MetricArg::AvgRate => Metric::AvgRate,
            MetricArg::RateDifference => Metric::RateDifference,
            MetricArg::NormalizedPower => Metric::NormalizedPower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookArg {
    Rvq,
    Maximin,
}

impl From<CodebookArg> for CodebookKind {
    fn from(c: CodebookArg) -> Self {
        match c {
            CodebookArg::Rvq => CodebookKind::Rvq,
            CodebookArg::Maximin => CodebookKind::Maximin,
        }
    }
}

/// Config file contents. Every key is optional and named like its flag.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub nt: Option<usize>,
    pub nr: Option<usize>,
    pub bits: Option<f64>,
    pub alpha: Option<f64>,
    pub k_max: Option<usize>,
    pub nr_bar: Option<f64>,
    pub b_bar: Option<f64>,
    pub rho_db: Option<f64>,
    pub trials: Option<usize>,
    pub metric: Option<MetricArg>,
    pub codebook: Option<CodebookArg>,
    pub candidates: Option<usize>,
    pub id: Option<Figure>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &PathBuf) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analytic,
    LargeSystem,
    Simulate,
    OptimalK,
    AfpRange,
    CompareCodebooks,
    ReproduceFigure,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Analytic => "analytic",
            CommandKind::LargeSystem => "large-system",
            CommandKind::Simulate => "simulate",
            CommandKind::OptimalK => "optimal-k",
            CommandKind::AfpRange => "afp-range",
            CommandKind::CompareCodebooks => "compare-codebooks",
            CommandKind::ReproduceFigure => "reproduce-figure",
        }
    }
}

/// Fully resolved and validated parameters of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub nt: usize,
    pub nr: usize,
    pub bits: f64,
    pub alpha: f64,
    pub k_max: usize,
    pub nr_bar: f64,
    pub b_bar: f64,
    pub rho_db: f64,
    pub trials: usize,
    pub metric: Metric,
    pub codebook: CodebookKind,
    pub candidates: usize,
    pub figure: Option<Figure>,
    pub destination: Destination,
    pub format: Format,
    pub seed: u64,
}

impl RunConfig {
    pub fn rho(&self) -> f64 {
        10f64.powf(self.rho_db / 10.0)
    }
}

/// Input rejected before any computation; maps to exit status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl Cli {
    pub fn resolve(self) -> Result<RunConfig, UsageError> {
        let (kind, shape, large, sim, fig, common): Split = match self.command {
            Command::Analytic(a) => (
                CommandKind::Analytic,
                Some(a.shape),
                None,
                None,
                None,
                a.common,
            ),
            Command::OptimalK(a) => (
                CommandKind::OptimalK,
                Some(a.shape),
                None,
                None,
                None,
                a.common,
            ),
            Command::AfpRange(a) => (
                CommandKind::AfpRange,
                Some(a.shape),
                None,
                None,
                None,
                a.common,
            ),
            Command::LargeSystem(a) => {
                let l = (a.nr_bar, a.b_bar, a.alpha, a.k_max);
                (
                    CommandKind::LargeSystem,
                    None,
                    Some(l),
                    None,
                    None,
                    a.common,
                )
            }
            Command::Simulate(a) => split_sim(CommandKind::Simulate, a),
            Command::CompareCodebooks(a) => split_sim(CommandKind::CompareCodebooks, a),
            Command::ReproduceFigure(a) => {
                let f = (a.id, a.trials);
                (
                    CommandKind::ReproduceFigure,
                    None,
                    None,
                    None,
                    Some(f),
                    a.common,
                )
            }
        };
        let file = match &common.config {
            Some(p) => FileConfig::load(p).map_err(UsageError)?,
            None => FileConfig::default(),
        };
        let shape = shape.unwrap_or_default();
        let (nr_bar, b_bar, l_alpha, l_k_max) = large.unwrap_or_default();
        let sim = sim.unwrap_or_default();
        let (fig_id, fig_trials) = fig.unwrap_or_default();

        let simulating = matches!(kind, CommandKind::Simulate | CommandKind::CompareCodebooks);
        let k_default = if simulating {
            DEFAULT_SIM_K_MAX
        } else {
            DEFAULT_K_MAX
        };
        let format = pick(common.format, file.format, Format::Csv);
        let figure = fig_id.or(file.id);
        let metric_default = match kind {
            CommandKind::CompareCodebooks => MetricArg::NormalizedPower,
            _ => MetricArg::AvgPower,
        };

        let cfg = RunConfig {
            command: kind,
            nt: pick(shape.nt, file.nt, 2),
            nr: pick(shape.nr, file.nr, 2),
            bits: pick(shape.bits, file.bits, 1.0),
            alpha: pick(shape.alpha.or(l_alpha), file.alpha, 0.8),
            k_max: pick(shape.k_max.or(l_k_max), file.k_max, k_default),
            nr_bar: pick(nr_bar, file.nr_bar, 1.0),
            b_bar: pick(b_bar, file.b_bar, 0.5),
            rho_db: pick(sim.rho_db, file.rho_db, DEFAULT_RHO_DB),
            trials: pick(sim.trials.or(fig_trials), file.trials, DEFAULT_TRIALS),
            metric: pick(sim.metric, file.metric, metric_default).into(),
            codebook: pick(sim.codebook, file.codebook, CodebookArg::Rvq).into(),
            candidates: pick(sim.candidates, file.candidates, DEFAULT_MAXIMIN_CANDIDATES),
            figure,
            destination: destination(common.output.or(file.output), kind, figure, format),
            format,
            seed: pick(common.seed, file.seed, 0),
        };
        validate(&cfg)?;
        Ok(cfg)
    }
}

#[derive(Debug, Default)]
struct SimParts {
    rho_db: Option<f64>,
    trials: Option<usize>,
    metric: Option<MetricArg>,
    codebook: Option<CodebookArg>,
    candidates: Option<usize>,
}

type Split = (
    CommandKind,
    Option<ShapeArgs>,
    Option<(Option<f64>, Option<f64>, Option<f64>, Option<usize>)>,
    Option<SimParts>,
    Option<(Option<Figure>, Option<usize>)>,
    CommonArgs,
);

fn split_sim(kind: CommandKind, a: SimArgs) -> Split {
    let parts = SimParts {
        rho_db: a.rho_db,
        trials: a.trials,
        metric: a.metric,
        codebook: a.codebook,
        candidates: a.candidates,
    };
    (kind, Some(a.shape), None, Some(parts), None, a.common)
}

fn destination(
    output: Option<PathBuf>,
    kind: CommandKind,
    figure: Option<Figure>,
    format: Format,
) -> Destination {
    if let Some(p) = output {
        return Destination::File(p);
    }
    match env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        Some(dir) => {
            let stem = match figure {
                Some(f) if kind == CommandKind::ReproduceFigure => f.name().to_string(),
                _ => kind.name().to_string(),
            };
            Destination::File(PathBuf::from(dir).join(format!("{stem}.{}", format.extension())))
        }
        None => Destination::Stdout,
    }
}

fn validate(c: &RunConfig) -> Result<(), UsageError> {
    let bad = |m: String| Err(UsageError(m));
    if !(0.0..=1.0).contains(&c.alpha) {
        return bad(format!("--alpha must lie in [0, 1], got {}", c.alpha));
    }
    if c.k_max == 0 {
        return bad("--k-max must be at least 1".into());
    }
    match c.command {
        CommandKind::LargeSystem => {
            if !(c.nr_bar >= 0.0 && c.nr_bar.is_finite()) {
                return bad(format!("--nr-bar must be >= 0, got {}", c.nr_bar));
            }
            if !(c.b_bar > 0.0 && c.b_bar.is_finite()) {
                return bad(format!("--b-bar must be > 0, got {}", c.b_bar));
            }
        }
        CommandKind::ReproduceFigure => {
            if c.figure.is_none() {
                return bad("reproduce-figure needs --id (fig1..fig7)".into());
            }
        }
        _ => {
            if c.nt == 0 || c.nr == 0 {
                return bad(format!("--nt and --nr must be >= 1, got {}x{}", c.nt, c.nr));
            }
            if !(c.bits > 0.0 && c.bits.is_finite()) {
                return bad(format!("--bits must be > 0, got {}", c.bits));
            }
        }
    }
    if !c.rho_db.is_finite() {
        return bad(format!("--rho-db must be finite, got {}", c.rho_db));
    }
    if c.trials < 2 {
        return bad(format!("--trials must be at least 2, got {}", c.trials));
    }
    if c.candidates == 0 {
        return bad("--candidates must be at least 1".into());
    }
    Ok(())
}
