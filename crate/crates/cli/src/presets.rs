//! Named grids for the `reproduce-figure` subcommand.

use clap::ValueEnum;
use fbint::finite::{optimal_interval_finite, AfpConfig};
use fbint::large::{optimal_interval_large, rate_difference_large, LargeSystemConfig};
use fbint::simulator::{ExperimentSpec, Metric};
use fbint::{CodebookKind, FadingModel, SystemShape};
use serde::Deserialize;

use crate::run::{large_row, simulation_rows, Failure, Tables};
use crate::table::Row;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Normalized power vs K, alpha = 0.8, B = 1, six shapes.
    Fig1,
    /// RVQ vs Maximin on 3 x 2, alpha in {0.8, 0.9, 0.95}.
    Fig2,
    /// Optimal K vs alpha: large system (nr_bar = 1) against 2 x 2.
    Fig3,
    /// Rate difference at K = 8, rho = 10 dB, growing Nt vs the large-system limit.
    Fig4,
    /// Rate difference vs K for 4 x 4, b_bar = 0.25, rho = 10 dB.
    Fig5,
    /// Optimal K from simulated rate difference vs the large-system prediction.
    Fig6,
    /// Large-system optimal K vs alpha for several nr_bar and b_bar.
    Fig7,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }
}

pub const FIG1_SHAPES: [(usize, usize); 6] = [(2, 2), (2, 3), (2, 4), (3, 2), (4, 2), (5, 2)];
pub const FIG3_ALPHAS: [f64; 9] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999, 0.9999];
const FIG4_MAX_BUDGET: f64 = 16.0;
const RHO_10_DB: f64 = 10.0;

fn shape(nt: usize, nr: usize) -> SystemShape {
    SystemShape::new(nt, nr).expect("preset shapes are valid")
}

fn model(alpha: f64, rho: f64) -> FadingModel {
    FadingModel::new(alpha, rho).expect("preset models are valid")
}

fn spec(
    s: SystemShape,
    m: FadingModel,
    bits: f64,
    k: usize,
    trials: usize,
    seed: u64,
    metric: Metric,
) -> ExperimentSpec {
    ExperimentSpec::new(s, m, bits, k)
        .with_trials(trials)
        .with_seed(seed)
        .with_metric(metric)
}

fn optimal_k_row(nt: Option<u64>, nr: f64, alpha: f64, bits: f64, k: usize, source: &str) -> Row {
    Row {
        nt,
        nr: Some(nr),
        alpha,
        bits_per_block: bits,
        k: None,
        metric: "optimal_k".into(),
        value: k as f64,
        stderr: None,
        analytic: None,
        source: source.into(),
        seed: None,
    }
}

pub fn figure_tables(fig: Figure, trials: usize, seed: u64) -> Tables {
    let mut out = Tables::default();
    match fig {
        Figure::Fig1 => {
            for (nt, nr) in FIG1_SHAPES {
                let grid: Vec<_> = (1..=10)
                    .map(|k| {
                        spec(
                            shape(nt, nr),
                            model(0.8, 1.0),
                            1.0,
                            k,
                            trials,
                            seed,
                            Metric::NormalizedPower,
                        )
                    })
                    .collect();
                out.extend(simulation_rows(&grid, "simulation"));
            }
        }
        Figure::Fig2 => {
            for alpha in [0.8, 0.9, 0.95] {
                for kind in [CodebookKind::Rvq, CodebookKind::Maximin] {
                    let grid: Vec<_> = (1..=8)
                        .map(|k| {
                            spec(
                                shape(3, 2),
                                model(alpha, 1.0),
                                1.0,
                                k,
                                trials,
                                seed,
                                Metric::NormalizedPower,
                            )
                            .with_codebook(kind)
                        })
                        .collect();
                    out.extend(simulation_rows(&grid, &format!("simulation:{kind}")));
                }
            }
        }
        Figure::Fig3 => {
            for b_bar in [0.5, 1.0] {
                for alpha in FIG3_ALPHAS {
                    let lc = LargeSystemConfig::new(1.0, b_bar, alpha).expect("valid preset");
                    match optimal_interval_large(&lc) {
                        Ok(r) => out.rows.push(optimal_k_row(
                            None,
                            1.0,
                            alpha,
                            b_bar,
                            r.k_star,
                            "large_system",
                        )),
                        Err(e) => out.fail(format!("nr_bar=1 b_bar={b_bar} alpha={alpha}"), e),
                    }
                    let bits = 2.0 * b_bar;
                    let fc =
                        AfpConfig::new(shape(2, 2), bits, model(alpha, 1.0)).expect("valid preset");
                    match optimal_interval_finite(&fc) {
                        Ok(r) => out.rows.push(optimal_k_row(
                            Some(2),
                            2.0,
                            alpha,
                            bits,
                            r.k_star,
                            "analytic",
                        )),
                        Err(e) => out.fail(format!("nt=2 nr=2 bits={bits} alpha={alpha}"), e),
                    }
                }
            }
        }
        Figure::Fig4 => {
            let k = 8;
            for alpha in [0.5, 0.9] {
                for b_bar in [0.125, 0.25, 0.5] {
                    let lc = LargeSystemConfig::new(1.0, b_bar, alpha).expect("valid preset");
                    match rate_difference_large(k, &lc) {
                        Ok(v) => out.rows.push(large_row(&lc, k, v)),
                        Err(e) => {
                            out.fail(format!("nr_bar=1 b_bar={b_bar} alpha={alpha} K={k}"), e)
                        }
                    }
                    let grid: Vec<_> = [4usize, 8, 16]
                        .into_iter()
                        .filter(|&nt| b_bar * nt as f64 * k as f64 <= FIG4_MAX_BUDGET)
                        .map(|nt| {
                            let m = model(alpha, db(RHO_10_DB));
                            spec(
                                shape(nt, nt),
                                m,
                                b_bar * nt as f64,
                                k,
                                trials,
                                seed,
                                Metric::RateDifference,
                            )
                        })
                        .collect();
                    out.extend(simulation_rows(&grid, "simulation"));
                }
            }
        }
        Figure::Fig5 => {
            for alpha in [0.5, 0.8, 0.9, 1.0] {
                let lc = LargeSystemConfig::new(1.0, 0.25, alpha).expect("valid preset");
                for k in 1..=10 {
                    match rate_difference_large(k, &lc) {
                        Ok(v) => out.rows.push(large_row(&lc, k, v)),
                        Err(e) => out.fail(format!("nr_bar=1 b_bar=0.25 alpha={alpha} K={k}"), e),
                    }
                }
                let grid: Vec<_> = (1..=10)
                    .map(|k| {
                        spec(
                            shape(4, 4),
                            model(alpha, db(RHO_10_DB)),
                            1.0,
                            k,
                            trials,
                            seed,
                            Metric::RateDifference,
                        )
                    })
                    .collect();
                out.extend(simulation_rows(&grid, "simulation"));
            }
        }
        Figure::Fig6 => {
            for (nt, bits) in [(3usize, 1.0), (4, 1.0), (4, 2.0)] {
                for alpha in [0.7, 0.8, 0.9] {
                    let b_bar = bits / nt as f64;
                    let lc = LargeSystemConfig::new(1.0, b_bar, alpha)
                        .expect("valid preset")
                        .with_k_max(8);
                    match optimal_interval_large(&lc) {
                        Ok(r) => out.rows.push(optimal_k_row(
                            None,
                            1.0,
                            alpha,
                            b_bar,
                            r.k_star,
                            "large_system",
                        )),
                        Err(e) => out.fail(format!("nr_bar=1 b_bar={b_bar} alpha={alpha}"), e),
                    }
                    let grid: Vec<_> = (1..=8)
                        .map(|k| {
                            spec(
                                shape(nt, nt),
                                model(alpha, db(RHO_10_DB)),
                                bits,
                                k,
                                trials,
                                seed,
                                Metric::RateDifference,
                            )
                        })
                        .collect();
                    let sim = simulation_rows(&grid, "simulation");
                    if sim.failures.is_empty() {
                        let best = argmax_k(&sim.rows);
                        let mut row = optimal_k_row(
                            Some(nt as u64),
                            nt as f64,
                            alpha,
                            bits,
                            best,
                            "simulation",
                        );
                        row.seed = Some(seed);
                        out.rows.push(row);
                    }
                    out.failures.extend(sim.failures);
                }
            }
        }
        Figure::Fig7 => {
            for nr_bar in [0.5, 1.0, 2.0] {
                for b_bar in [0.1, 0.5, 1.0] {
                    for alpha in FIG3_ALPHAS {
                        let lc =
                            LargeSystemConfig::new(nr_bar, b_bar, alpha).expect("valid preset");
                        match optimal_interval_large(&lc) {
                            Ok(r) => out.rows.push(optimal_k_row(
                                None,
                                nr_bar,
                                alpha,
                                b_bar,
                                r.k_star,
                                "large_system",
                            )),
                            Err(e) => {
                                out.fail(format!("nr_bar={nr_bar} b_bar={b_bar} alpha={alpha}"), e)
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Smallest K with the largest value among rows ordered by K.
fn argmax_k(rows: &[Row]) -> usize {
    let mut best = &rows[0];
    for r in rows {
        if r.value > best.value {
            best = r;
        }
    }
    best.k.unwrap_or(1) as usize
}

impl Tables {
    fn fail(&mut self, cell: String, e: fbint::Error) {
        self.failures.push(Failure {
            cell,
            message: e.to_string(),
        });
    }
}
