//! Command dispatch and exit-status mapping.

use std::ffi::OsString;
use std::fmt;

use clap::Parser;
use fbint::finite::{afp_beats_mfp_max_k, optimal_interval_finite, AfpConfig, IntervalOptimum};
use fbint::large::{optimal_interval_large, LargeSystemConfig};
use fbint::simulator::{sweep, ExperimentSpec};
use fbint::{CodebookKind, Error, FadingModel, SystemShape};

use crate::config::{Cli, CommandKind, RunConfig, UsageError};
use crate::presets::figure_tables;
use crate::table::{emit_table, Row};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub cell: String,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell {}: {}", self.cell, self.message)
    }
}

/// Rows produced by a command, plus per-cell failures and summary lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub summary: Vec<String>,
}

impl Tables {
    pub fn extend(&mut self, other: Tables) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
        self.summary.extend(other.summary);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Usage(String),
    Compute(String),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e.0)
    }
}

fn cell_name(s: &ExperimentSpec) -> String {
    format!(
        "nt={} nr={} alpha={} bits={} K={} codebook={}",
        s.shape.nt, s.shape.nr, s.model.alpha, s.bits_per_block, s.k, s.codebook_kind
    )
}

/// Sweep `grid` and convert each record into a row; failing cells are
/// collected instead of stopping the sweep.
pub fn simulation_rows(grid: &[ExperimentSpec], source: &str) -> Tables {
    let mut out = Tables::default();
    let records = match sweep(grid) {
        Ok(r) => r,
        Err(e) => {
            out.failures.push(Failure {
                cell: "grid".into(),
                message: e.to_string(),
            });
            return out;
        }
    };
    for rec in records {
        let s = rec.spec;
        match (rec.estimate, rec.error) {
            (Some(e), _) => out.rows.push(Row {
                nt: Some(s.shape.nt as u64),
                nr: Some(s.shape.nr as f64),
                alpha: s.model.alpha,
                bits_per_block: s.bits_per_block,
                k: Some(s.k as u64),
                metric: s.metric.to_string(),
                value: e.mean,
                stderr: Some(e.stderr),
                analytic: rec.analytic,
                source: source.into(),
                seed: Some(s.seed),
            }),
            (None, err) => out.failures.push(Failure {
                cell: cell_name(&s),
                message: err.unwrap_or_else(|| "no estimate".into()),
            }),
        }
    }
    out
}

pub fn large_row(cfg: &LargeSystemConfig, k: usize, value: f64) -> Row {
    Row {
        nt: None,
        nr: Some(cfg.nr_bar),
        alpha: cfg.alpha,
        bits_per_block: cfg.b_bar,
        k: Some(k as u64),
        metric: "rate_difference".into(),
        value,
        stderr: None,
        analytic: Some(value),
        source: "large_system".into(),
        seed: None,
    }
}

fn analytic_row(cfg: &RunConfig, k: Option<usize>, metric: &str, value: f64) -> Row {
    Row {
        nt: Some(cfg.nt as u64),
        nr: Some(cfg.nr as f64),
        alpha: cfg.alpha,
        bits_per_block: cfg.bits,
        k: k.map(|k| k as u64),
        metric: metric.into(),
        value,
        stderr: None,
        analytic: Some(value),
        source: "analytic".into(),
        seed: None,
    }
}

fn compute_err(cell: String, e: Error) -> RunError {
    RunError::Compute(
        Failure {
            cell,
            message: e.to_string(),
        }
        .to_string(),
    )
}

fn afp_config(cfg: &RunConfig) -> Result<AfpConfig, RunError> {
    let shape = SystemShape::new(cfg.nt, cfg.nr).map_err(|e| RunError::Usage(e.to_string()))?;
    let model = FadingModel::with_alpha(cfg.alpha).map_err(|e| RunError::Usage(e.to_string()))?;
    AfpConfig::new(shape, cfg.bits, model)
        .map(|c| c.with_k_max(cfg.k_max))
        .map_err(|e| match e {
            Error::NoClosedForm { .. } => RunError::Usage(format!(
                "{e}; closed forms cover 2 x Nr (Nr >= 2) and Nt x 2 (Nt > 2), use `simulate` otherwise"
            )),
            other => RunError::Usage(other.to_string()),
        })
}

fn finite_cell(cfg: &RunConfig) -> String {
    format!(
        "nt={} nr={} alpha={} bits={}",
        cfg.nt, cfg.nr, cfg.alpha, cfg.bits
    )
}

pub fn k_star_line(r: &IntervalOptimum) -> String {
    if r.horizon_limited {
        format!("K*={} (horizon-limited)", r.k_star)
    } else {
        format!("K*={}", r.k_star)
    }
}

/// `K in [a,b]` for a contiguous set, `K in {..}` otherwise.
pub fn range_line(ks: &[usize]) -> String {
    match ks {
        [] => "K in {} (no interval beats K=1)".into(),
        [first, .., last] if last - first + 1 == ks.len() => format!("K in [{first},{last}]"),
        [only] => format!("K in [{only},{only}]"),
        _ => {
            let list: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
            format!("K in {{{}}}", list.join(","))
        }
    }
}

fn sim_grid(cfg: &RunConfig, kind: CodebookKind) -> Result<Vec<ExperimentSpec>, RunError> {
    let shape = SystemShape::new(cfg.nt, cfg.nr).map_err(|e| RunError::Usage(e.to_string()))?;
    let model =
        FadingModel::new(cfg.alpha, cfg.rho()).map_err(|e| RunError::Usage(e.to_string()))?;
    Ok((1..=cfg.k_max)
        .map(|k| {
            let mut s = ExperimentSpec::new(shape, model, cfg.bits, k)
                .with_trials(cfg.trials)
                .with_seed(cfg.seed)
                .with_metric(cfg.metric)
                .with_codebook(kind);
            s.maximin_candidates = cfg.candidates;
            s
        })
        .collect())
}

fn best_k(rows: &[Row]) -> Option<usize> {
    let curve: Vec<f64> = rows.iter().map(|r| r.value).collect();
    if curve.is_empty() {
        return None;
    }
    Some(IntervalOptimum::from_curve(curve).k_star)
}

/// Compute the rows for `cfg` without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<Tables, RunError> {
    let mut out = Tables::default();
    match cfg.command {
        CommandKind::Analytic | CommandKind::OptimalK => {
            let ac = afp_config(cfg)?;
            let r = optimal_interval_finite(&ac).map_err(|e| compute_err(finite_cell(cfg), e))?;
            for (i, v) in r.curve.iter().enumerate() {
                out.rows
                    .push(analytic_row(cfg, Some(i + 1), "avg_power", *v));
            }
            if cfg.command == CommandKind::OptimalK {
                out.summary.push(k_star_line(&r));
            }
        }
        CommandKind::AfpRange => {
            let ac = afp_config(cfg)?;
            let r = afp_beats_mfp_max_k(&ac).map_err(|e| compute_err(finite_cell(cfg), e))?;
            let curve = optimal_interval_finite(&ac)
                .map_err(|e| compute_err(finite_cell(cfg), e))?
                .curve;
            for (i, v) in curve.iter().enumerate() {
                out.rows
                    .push(analytic_row(cfg, Some(i + 1), "avg_power", *v));
            }
            for (i, v) in r.tight_bound.iter().enumerate() {
                out.rows
                    .push(analytic_row(cfg, Some(i + 1), "afp_bound", *v));
            }
            for (i, v) in r.loose_bound.iter().enumerate() {
                out.rows
                    .push(analytic_row(cfg, Some(i + 1), "afp_bound_loose", *v));
            }
            out.rows.push(analytic_row(
                cfg,
                None,
                "large_budget_bound",
                r.large_budget_bound,
            ));
            out.summary.push(range_line(&r.ks));
        }
        CommandKind::LargeSystem => {
            let lc = LargeSystemConfig::new(cfg.nr_bar, cfg.b_bar, cfg.alpha)
                .map_err(|e| RunError::Usage(e.to_string()))?
                .with_k_max(cfg.k_max);
            let r = optimal_interval_large(&lc).map_err(|e| {
                compute_err(
                    format!(
                        "nr_bar={} b_bar={} alpha={}",
                        cfg.nr_bar, cfg.b_bar, cfg.alpha
                    ),
                    e,
                )
            })?;
            for (i, v) in r.curve.iter().enumerate() {
                out.rows.push(large_row(&lc, i + 1, *v));
            }
            out.summary.push(k_star_line(&r));
        }
        CommandKind::Simulate => {
            out.extend(simulation_rows(&sim_grid(cfg, cfg.codebook)?, "simulation"));
            if out.failures.is_empty() {
                if let Some(k) = best_k(&out.rows) {
                    out.summary
                        .push(format!("K*={k} (simulated, {})", cfg.metric));
                }
            }
        }
        CommandKind::CompareCodebooks => {
            for kind in [CodebookKind::Rvq, CodebookKind::Maximin] {
                let t = simulation_rows(&sim_grid(cfg, kind)?, &format!("simulation:{kind}"));
                if t.failures.is_empty() {
                    if let Some(k) = best_k(&t.rows) {
                        out.summary.push(format!("{kind}: K*={k}"));
                    }
                }
                out.extend(t);
            }
        }
        CommandKind::ReproduceFigure => {
            let fig = cfg
                .figure
                .ok_or_else(|| RunError::Usage("reproduce-figure needs --id".into()))?;
            out.extend(figure_tables(fig, cfg.trials, cfg.seed));
        }
    }
    Ok(out)
}

/// Run one invocation end to end and return the process exit status.
///
/// The table goes to the configured destination; summaries and diagnostics
/// go to stderr.
pub fn run(cfg: &RunConfig) -> i32 {
    let tables = match execute(cfg) {
        Ok(t) => t,
        Err(RunError::Usage(m)) => {
            eprintln!("fbint: error: {m}");
            return EXIT_USAGE;
        }
        Err(RunError::Compute(m)) => {
            eprintln!("fbint: error: {m}");
            return EXIT_COMPUTE;
        }
    };
    for line in &tables.summary {
        eprintln!("{line}");
    }
    let mut status = EXIT_OK;
    if !tables.rows.is_empty() {
        if let Err(m) = emit_table(&tables.rows, cfg.format, &cfg.destination) {
            eprintln!("fbint: error: {m}");
            status = EXIT_COMPUTE;
        }
    }
    if let Some(first) = tables.failures.first() {
        eprintln!(
            "fbint: error: {} of {} cells failed; first {first}",
            tables.failures.len(),
            tables.failures.len() + tables.rows.len()
        );
        status = EXIT_COMPUTE;
    }
    status
}

/// Parse `args`, resolve the configuration and run it.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.resolve() {
        Ok(cfg) => run(&cfg),
        Err(UsageError(m)) => {
            eprintln!("fbint: error: {m}");
            EXIT_USAGE
        }
    }
}
