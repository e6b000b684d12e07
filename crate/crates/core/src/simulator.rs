//! Seeded Monte Carlo engine for the adaptive feedback schedule.
//!
//! Each trial draws `H(1)`, quantizes the dominant beamforming direction with
//! `round(B*K)` bits, and then keeps that vector for `K` blocks while the
//! channel evolves. Trial `i` uses the random stream `(seed, i)`, and trial
//! results are reduced in index order, so estimates do not depend on the
//! worker count.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{gram_eigenvalues, power_unchecked, sample_channel, FadingModel, SystemShape};
use crate::codebook::{
    maximin_codebook_with, select_beamformer, select_beamformer_streaming, Codebook, CodebookKind,
    DEFAULT_MAXIMIN_CANDIDATES, STREAMING_BITS_CAP,
};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, pairwise_sum, Execution};
use crate::finite::{interval_decay_average, mean_top_eigenvalue, ClosedForm};
use crate::quadrature::QuadratureSpec;
use crate::rng::RandomStream;

pub const DEFAULT_TRIALS: usize = 3_000;

/// Stream id reserved for building a configuration's Maximin codebook.
const CODEBOOK_STREAM: u64 = u64::MAX;
/// Seed offset for perfect-feedback normalizer draws.
const NORMALIZER_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AvgPower,
    AvgRate,
    RateDifference,
    NormalizedPower,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::AvgPower => "avg_power",
            Metric::AvgRate => "avg_rate",
            Metric::RateDifference => "rate_difference",
            Metric::NormalizedPower => "normalized_power",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub shape: SystemShape,
    /// `alpha` and the SNR `rho` (linear).
    pub model: FadingModel,
    pub bits_per_block: f64,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub codebook_kind: CodebookKind,
    pub metric: Metric,
    pub maximin_candidates: usize,
}

impl ExperimentSpec {
    pub fn new(shape: SystemShape, model: FadingModel, bits_per_block: f64, k: usize) -> Self {
        Self {
            shape,
            model,
            bits_per_block,
            k,
            trials: DEFAULT_TRIALS,
            seed: 0,
            codebook_kind: CodebookKind::Rvq,
            metric: Metric::AvgPower,
            maximin_candidates: DEFAULT_MAXIMIN_CANDIDATES,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_codebook(mut self, kind: CodebookKind) -> Self {
        self.codebook_kind = kind;
        self
    }

    /// `round(B*K)` with halves rounded up.
    pub fn bit_budget(&self) -> u32 {
        (self.bits_per_block * self.k as f64 + 0.5).floor() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bits_per_block >= 0.0 && self.bits_per_block.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bits per block must be >= 0, got {}",
                self.bits_per_block
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter(
                "interval length must be >= 1".into(),
            ));
        }
        if self.trials < 2 {
            return Err(Error::InvalidParameter("need at least 2 trials".into()));
        }
        let bits = self.bit_budget();
        if bits > STREAMING_BITS_CAP {
            return Err(Error::BitCap {
                bits,
                cap: STREAMING_BITS_CAP,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    /// Mean and `sd / sqrt(n)` with the `n - 1` variance, both pairwise-summed.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            trials: n,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            stderr: self.stderr * c.abs(),
            trials: self.trials,
        }
    }

    /// `|mean - target| <= z * stderr`.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.stderr
    }
}

/// Observable steps of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialEvent {
    /// A codebook search ran at this block.
    Selected { block: usize, index: usize },
    /// Received power with the held beamformer.
    Block { block: usize, power: f64 },
}

fn maximin_for(spec: &ExperimentSpec, mode: Execution) -> Result<Arc<Codebook>> {
    type Key = (usize, u32, usize, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Codebook>>>> = OnceLock::new();
    let bits = spec.bit_budget();
    let key = (spec.shape.nt, bits, spec.maximin_candidates, spec.seed);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(cb) = cache.lock().unwrap().get(&key) {
        return Ok(cb.clone());
    }
    let mut rng = RandomStream::new(spec.seed, CODEBOOK_STREAM);
    let cb = Arc::new(maximin_codebook_with(
        spec.shape.nt,
        bits,
        spec.maximin_candidates,
        &mut rng,
        mode,
    )?);
    cache.lock().unwrap().insert(key, cb.clone());
    Ok(cb)
}

/// One trial of the schedule; returns the per-block received powers.
///
/// `codebook` is the shared deployed codebook, or `None` for a fresh RVQ
/// codebook drawn from the trial's own stream.
pub fn run_trial<F>(
    spec: &ExperimentSpec,
    codebook: Option<&Codebook>,
    trial: u64,
    mut observe: F,
) -> Result<Vec<f64>>
where
    F: FnMut(TrialEvent),
{
    let mut rng = RandomStream::new(spec.seed, trial);
    let mut h = sample_channel(spec.shape, &mut rng);
    let sel = match codebook {
        Some(cb) => select_beamformer(&h, cb)?,
        None => select_beamformer_streaming(&h, spec.shape.nt, spec.bit_budget(), &mut rng)?,
    };
    observe(TrialEvent::Selected {
        block: 1,
        index: sel.index,
    });
    let v: &[Complex64] = &sel.vector;
    let mut powers = Vec::with_capacity(spec.k);
    for block in 1..=spec.k {
        if block > 1 {
            h.evolve_in_place(spec.model.alpha, &mut rng);
        }
        let p = power_unchecked(&h, v);
        observe(TrialEvent::Block { block, power: p });
        powers.push(p);
    }
    Ok(powers)
}

fn per_trial_value(metric: Metric, powers: &[f64], rho: f64, nt: usize) -> f64 {
    let k = powers.len() as f64;
    let sum: f64 = match metric {
        Metric::AvgPower | Metric::NormalizedPower => powers.iter().sum(),
        Metric::AvgRate => {
            powers.iter().map(|p| (rho * p).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
        }
        Metric::RateDifference => {
            let n = nt as f64;
            powers
                .iter()
                .map(|p| (1.0 / (rho * n) + p / n).log2())
                .sum()
        }
    };
    sum / k
}

fn simulate_raw(spec: &ExperimentSpec, metric: Metric, mode: Execution) -> Result<Estimate> {
    spec.validate()?;
    let codebook = match spec.codebook_kind {
        CodebookKind::Rvq => None,
        CodebookKind::Maximin => Some(maximin_for(spec, mode)?),
    };
    let values = map_indexed(spec.trials, mode, |i| {
        run_trial(spec, codebook.as_deref(), i as u64, |_| {})
            .map(|p| per_trial_value(metric, &p, spec.model.rho, spec.shape.nt))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Estimate `spec.metric`.
pub fn simulate(spec: &ExperimentSpec) -> Result<Estimate> {
    simulate_with(spec, Execution::default())
}

pub fn simulate_with(spec: &ExperimentSpec, mode: Execution) -> Result<Estimate> {
    match spec.metric {
        Metric::NormalizedPower => {
            let raw = simulate_raw(spec, Metric::AvgPower, mode)?;
            let norm = perfect_feedback_reference(spec.shape, spec.trials, spec.seed, mode)?;
            Ok(raw.scaled(1.0 / norm))
        }
        m => simulate_raw(spec, m, mode),
    }
}

pub fn simulate_avg_power(spec: &ExperimentSpec) -> Result<Estimate> {
    simulate_raw(spec, Metric::AvgPower, Execution::default())
}

/// Mean over blocks of `log2(1 + rho * power)`.
pub fn simulate_avg_rate(spec: &ExperimentSpec, rho: f64) -> Result<Estimate> {
    check_rho(rho)?;
    let mut s = *spec;
    s.model.rho = rho;
    simulate_raw(&s, Metric::AvgRate, Execution::default())
}

/// Mean over blocks of `log2(1/(rho*Nt) + power/Nt)`.
pub fn simulate_rate_difference(spec: &ExperimentSpec, rho: f64) -> Result<Estimate> {
    check_rho(rho)?;
    let mut s = *spec;
    s.model.rho = rho;
    simulate_raw(&s, Metric::RateDifference, Execution::default())
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("rho={rho} must be > 0")))
    }
}

/// Monte Carlo `E[lambda_max(H^H H)]`, the power under perfect feedback.
pub fn perfect_feedback_power(shape: SystemShape, trials: usize, seed: u64) -> Result<Estimate> {
    perfect_feedback_power_with(shape, trials, seed, Execution::default())
}

pub fn perfect_feedback_power_with(
    shape: SystemShape,
    trials: usize,
    seed: u64,
    mode: Execution,
) -> Result<Estimate> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let values = map_indexed(trials, mode, |i| {
        let mut rng = RandomStream::new(seed ^ NORMALIZER_SEED_MIX, i as u64);
        gram_eigenvalues(&sample_channel(shape, &mut rng))[0]
    });
    Ok(Estimate::from_samples(&values))
}

/// Exact perfect-feedback power where known, Monte Carlo otherwise.
pub fn perfect_feedback_reference(
    shape: SystemShape,
    trials: usize,
    seed: u64,
    mode: Execution,
) -> Result<f64> {
    let (small, large) = (shape.nt.min(shape.nr), shape.nt.max(shape.nr));
    match small {
        1 => Ok(large as f64),
        2 => mean_top_eigenvalue(large as u32),
        _ => Ok(perfect_feedback_power_with(shape, trials, seed, mode)?.mean),
    }
}

/// Closed-form counterpart of an RVQ power metric at the simulated bit budget.
pub fn analytic_value(spec: &ExperimentSpec) -> Option<f64> {
    if spec.codebook_kind != CodebookKind::Rvq {
        return None;
    }
    let form = ClosedForm::for_shape(spec.shape).ok()?;
    let g = form
        .gamma(spec.bit_budget() as f64, &QuadratureSpec::default())
        .ok()?;
    let floor = form.floor();
    let p = floor + interval_decay_average(spec.model.alpha, spec.k) * (g - floor);
    match spec.metric {
        Metric::AvgPower => Some(p),
        Metric::NormalizedPower => Some(p / form.perfect_feedback().ok()?),
        Metric::AvgRate | Metric::RateDifference => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub spec: ExperimentSpec,
    pub estimate: Option<Estimate>,
    pub analytic: Option<f64>,
    pub error: Option<String>,
}

/// Evaluate every grid point in order. A failing cell is recorded with its
/// error and does not stop the sweep.
pub fn sweep(grid: &[ExperimentSpec]) -> Result<Vec<SweepRecord>> {
    sweep_with(grid, Execution::default())
}

pub fn sweep_with(grid: &[ExperimentSpec], mode: Execution) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    Ok(grid
        .iter()
        .map(|spec| match simulate_with(spec, mode) {
            Ok(e) => SweepRecord {
                spec: *spec,
                estimate: Some(e),
                analytic: analytic_value(spec),
                error: None,
            },
            Err(e) => SweepRecord {
                spec: *spec,
                estimate: None,
                analytic: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}
