//! Finite-size received-power analysis for `2 x Nr` and `Nt x 2` channels.
//!
//! With a beamformer quantized at block 1 using `B*K` RVQ bits, the expected
//! power in block `k` decays geometrically towards the isotropic level:
//! `N + alpha^{2(k-1)} (gamma(BK) - N)`, where `N` is the receive count and
//! `gamma` is the first-block power. `gamma` has a closed form in `phi` when
//! `nt = 2`; for `nr = 2, nt > 2` it needs a triple integral over the rank-2
//! quantization law and the eigenvalue density.

mod phi;
mod rank2;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock, RwLock};

use num::rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::channel::{FadingModel, SystemShape};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::quadrature::{try_integrate, QuadratureSpec};

pub use phi::{
    mean_top_eigenvalue, mean_top_eigenvalue_exact, phi, phi_exact, PhiTable, PHI_INDEX_CAP,
};
pub use rank2::{cdf_rank2, eigen_joint_pdf, pdf_rank2, DEGENERATE_GAP};

pub const DEFAULT_K_MAX: usize = 64;

/// Parameters of the finite-size interval problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfpConfig {
    pub shape: SystemShape,
    pub bits_per_block: f64,
    pub model: FadingModel,
    pub k_max: usize,
    #[serde(default)]
    pub quad: QuadratureSpec,
}

impl AfpConfig {
    pub fn new(shape: SystemShape, bits_per_block: f64, model: FadingModel) -> Result<Self> {
        let cfg = Self {
            shape,
            bits_per_block,
            model,
            k_max: DEFAULT_K_MAX,
            quad: QuadratureSpec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bits_per_block > 0.0 && self.bits_per_block.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bits per block must be positive, got {}",
                self.bits_per_block
            )));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be >= 1".into()));
        }
        self.quad.validate()?;
        ClosedForm::for_shape(self.shape).map(|_| ())
    }
}

/// Which closed-form path applies to a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// `2 x nr`, `nr >= 2`.
    TwoTransmit { nr: u32 },
    /// `nt x 2`, `nt > 2`.
    TwoReceive { nt: u32 },
}

impl ClosedForm {
    pub fn for_shape(shape: SystemShape) -> Result<Self> {
        match (shape.nt, shape.nr) {
            (2, nr) if nr >= 2 => Ok(ClosedForm::TwoTransmit { nr: nr as u32 }),
            (nt, 2) if nt > 2 => Ok(ClosedForm::TwoReceive { nt: nt as u32 }),
            (nt, nr) => Err(Error::NoClosedForm { nt, nr }),
        }
    }

    /// Isotropic (zero-bit) power level, equal to the receive count.
    pub fn floor(&self) -> f64 {
        match self {
            ClosedForm::TwoTransmit { nr } => *nr as f64,
            ClosedForm::TwoReceive { .. } => 2.0,
        }
    }

    pub fn gamma(&self, total_bits: f64, quad: &QuadratureSpec) -> Result<f64> {
        match *self {
            ClosedForm::TwoTransmit { nr } => gamma_2xnr(nr, total_bits),
            ClosedForm::TwoReceive { nt } => gamma_ntx2(nt, total_bits, quad),
        }
    }

    /// Perfect-feedback power `E[lambda_max]`.
    pub fn perfect_feedback(&self) -> Result<f64> {
        match *self {
            ClosedForm::TwoTransmit { nr } => mean_top_eigenvalue(nr),
            ClosedForm::TwoReceive { nt } => mean_top_eigenvalue(nt),
        }
    }
}

/// `(E[l1], E[l1 - l2])` for the `2 x nr` eigenvalue law.
fn top_and_gap_moments(nr: u32) -> Result<(f64, f64)> {
    static CACHE: OnceLock<RwLock<HashMap<u32, (f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.read().unwrap().get(&nr) {
        return Ok(*v);
    }
    let t = PhiTable::global();
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    let norm = BigRational::from_integer(phi::factorial(nr - 1) * phi::factorial(nr - 2));
    let a = t.get(nr + 1, nr - 2)?;
    let b = t.get(nr, nr - 1)?;
    let c = t.get(nr - 1, nr)?;
    let d = t.get(nr - 2, nr + 1)?;
    let top = (&*a - &two * &*b + &*c) / &norm;
    let gap = (&*a - &three * &*b + &three * &*c - &*d) / &norm;
    let v = (phi::to_f64(&top), phi::to_f64(&gap));
    cache.write().unwrap().insert(nr, v);
    Ok(v)
}

/// First-block power of a `2 x nr` channel quantized with `total_bits` RVQ bits.
pub fn gamma_2xnr(nr: u32, total_bits: f64) -> Result<f64> {
    if nr < 2 {
        return Err(Error::Domain(format!(
            "2 x Nr closed form needs nr >= 2, got {nr}"
        )));
    }
    if nr + 1 > PHI_INDEX_CAP {
        return Err(Error::Domain(format!("nr={nr} exceeds the phi index cap")));
    }
    check_bits(total_bits)?;
    let (top, gap) = top_and_gap_moments(nr)?;
    let (_, inv) = rank2::codebook_size(total_bits);
    Ok(top - gap * inv)
}

fn check_bits(total_bits: f64) -> Result<()> {
    if total_bits >= 0.0 && !total_bits.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "bit budget must be >= 0, got {total_bits}"
        )))
    }
}

/// `(1/K) sum_{k=0}^{K-1} alpha^{2k}`, summed directly so `alpha = 1` is exact.
pub fn interval_decay_average(alpha: f64, k: usize) -> f64 {
    let a2 = alpha * alpha;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..k {
        sum += term;
        term *= a2;
    }
    sum / k as f64
}

/// Expected power in block `k` (1-based) under a beamformer quantized at block 1.
pub fn decay_power_2xnr(nr: u32, total_bits: f64, alpha: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha={alpha} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::Domain("block index is 1-based".into()));
    }
    let g = gamma_2xnr(nr, total_bits)?;
    let n = nr as f64;
    Ok(n + alpha.powi(2 * (k as i32 - 1)) * (g - n))
}

fn average_power(form: ClosedForm, cfg: &AfpConfig, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("interval length must be >= 1".into()));
    }
    let g = form.gamma(cfg.bits_per_block * k as f64, &cfg.quad)?;
    let floor = form.floor();
    Ok(floor + interval_decay_average(cfg.model.alpha, k) * (g - floor))
}

/// Received power averaged over a `K`-block interval, `2 x Nr` path.
pub fn avg_power_2xnr(cfg: &AfpConfig, k: usize) -> Result<f64> {
    match ClosedForm::for_shape(cfg.shape)? {
        form @ ClosedForm::TwoTransmit { .. } => average_power(form, cfg, k),
        _ => Err(Error::NoClosedForm {
            nt: cfg.shape.nt,
            nr: cfg.shape.nr,
        }),
    }
}

/// Received power averaged over a `K`-block interval, `Nt x 2` path.
pub fn avg_power_ntx2(cfg: &AfpConfig, k: usize) -> Result<f64> {
    match ClosedForm::for_shape(cfg.shape)? {
        form @ ClosedForm::TwoReceive { .. } => average_power(form, cfg, k),
        _ => Err(Error::NoClosedForm {
            nt: cfg.shape.nt,
            nr: cfg.shape.nr,
        }),
    }
}

/// Interval-averaged power for whichever closed form matches the shape.
pub fn avg_power(cfg: &AfpConfig, k: usize) -> Result<f64> {
    average_power(ClosedForm::for_shape(cfg.shape)?, cfg, k)
}

/// `P(Gamma(k, 1) > x)`.
fn gamma_tail(k: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= x / j as f64;
        sum += term;
    }
    (sum.ln() - x).exp()
}

const TRUNCATION_MASS: f64 = 1e-13;

/// Eigenvalue-domain upper limit: at least `lambda_max`, extended until the
/// trace tail `P(l1 + l2 > L)` drops below 1e-13 (which bounds the `l1` tail).
pub fn truncation_bound(nt: u32, quad: &QuadratureSpec) -> f64 {
    let mut bound = quad.lambda_max;
    while gamma_tail(2 * nt, bound) > TRUNCATION_MASS {
        bound += 5.0;
    }
    bound
}

/// First-block power of an `nt x 2` channel with `total_bits` RVQ bits.
pub fn gamma_ntx2(nt: u32, total_bits: f64, quad: &QuadratureSpec) -> Result<f64> {
    if nt <= 2 {
        return Err(Error::Domain(format!("Nt x 2 path needs nt > 2, got {nt}")));
    }
    check_bits(total_bits)?;
    quad.validate()?;

    type Key = (u32, u64, [u64; 3], usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, f64>>> = OnceLock::new();
    let key: Key = (
        nt,
        total_bits.to_bits(),
        [
            quad.abs_tol.to_bits(),
            quad.rel_tol.to_bits(),
            quad.lambda_max.to_bits(),
        ],
        quad.max_subdivisions,
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }

    let top = mean_top_eigenvalue(nt)?;
    let (size, _) = rank2::codebook_size(total_bits);
    let ln_norm = rank2::ln_joint_norm(nt);
    let bound = truncation_bound(nt, quad);
    let loss = try_integrate(
        |l1| {
            if l1 <= 0.0 {
                return Ok(0.0);
            }
            try_integrate(
                |l2| {
                    let dens = rank2::joint_pdf_unchecked(l1, l2, nt, ln_norm);
                    if dens == 0.0 || l2 <= 0.0 {
                        return Ok(0.0);
                    }
                    Ok(dens * rank2::cdf_power_integral(l1, l2, nt, size, quad)?)
                },
                0.0,
                l1,
                quad,
            )
        },
        0.0,
        bound,
        quad,
    )?;
    let g = top - loss;
    cache.lock().unwrap().insert(key, g);
    Ok(g)
}

/// Result of an exhaustive interval search over `K in [1, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalOptimum {
    pub k_star: usize,
    pub value: f64,
    /// The maximum sits at `k_max`; the true optimum may lie beyond it.
    pub horizon_limited: bool,
    /// Objective for `K = 1..=k_max`.
    pub curve: Vec<f64>,
}

impl IntervalOptimum {
    /// Smallest-K argmax of `curve` (index 0 is K = 1).
    pub fn from_curve(curve: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, v) in curve.iter().enumerate() {
            if *v > curve[best] {
                best = i;
            }
        }
        Self {
            k_star: best + 1,
            value: curve[best],
            horizon_limited: best + 1 == curve.len(),
            curve,
        }
    }
}

fn power_curve(cfg: &AfpConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let form = ClosedForm::for_shape(cfg.shape)?;
    let mode = match form {
        ClosedForm::TwoTransmit { .. } => Execution::Sequential,
        ClosedForm::TwoReceive { .. } => Execution::Parallel,
    };
    map_indexed(cfg.k_max, mode, |i| average_power(form, cfg, i + 1))
        .into_iter()
        .collect()
}

/// `K*` maximizing the interval-averaged received power.
pub fn optimal_interval_finite(cfg: &AfpConfig) -> Result<IntervalOptimum> {
    Ok(IntervalOptimum::from_curve(power_curve(cfg)?))
}

/// Intervals where the adaptive schedule beats feeding back every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfpRange {
    /// Every `K in [2, k_max]` with `avg_power(K) > avg_power(1)`.
    pub ks: Vec<usize>,
    /// `((1 - alpha^{2K}) / (1 - alpha^2)) * ratio(K)` for `K = 1..=k_max`;
    /// the adaptive schedule wins exactly when `K` is below it.
    pub tight_bound: Vec<f64>,
    /// `ratio(K) / (1 - alpha^2)`, with `ratio = (gamma(BK) - N) / (gamma(B) - N)`.
    pub loose_bound: Vec<f64>,
    /// `1 / (1 - alpha^2)`, the large-budget limit of the loose bound.
    pub large_budget_bound: f64,
}

impl AfpRange {
    pub fn max_k(&self) -> Option<usize> {
        self.ks.last().copied()
    }
}

pub fn afp_beats_mfp_max_k(cfg: &AfpConfig) -> Result<AfpRange> {
    cfg.validate()?;
    let form = ClosedForm::for_shape(cfg.shape)?;
    let curve = power_curve(cfg)?;
    let floor = form.floor();
    let alpha = cfg.model.alpha;
    let a2 = alpha * alpha;
    let base = curve[0] - floor;
    let mut tight = Vec::with_capacity(cfg.k_max);
    let mut loose = Vec::with_capacity(cfg.k_max);
    for (i, v) in curve.iter().enumerate() {
        let k = (i + 1) as f64;
        // (v - floor) = (1/K) S_K (gamma(BK) - floor), S_K = sum alpha^{2j}
        let gk = (v - floor) / interval_decay_average(alpha, i + 1);
        let ratio = gk / base;
        tight.push(k * interval_decay_average(alpha, i + 1) * ratio);
        loose.push(if a2 < 1.0 {
            ratio / (1.0 - a2)
        } else {
            f64::INFINITY
        });
    }
    let ks = (2..=cfg.k_max)
        .filter(|&k| curve[k - 1] > curve[0])
        .collect();
    Ok(AfpRange {
        ks,
        tight_bound: tight,
        loose_bound: loose,
        large_budget_bound: if a2 < 1.0 {
            1.0 / (1.0 - a2)
        } else {
            f64::INFINITY
        },
    })
}
