//! Large-system asymptotics: `Nt, Nr, B -> inf` with `nr_bar = Nr/Nt` and
//! `b_bar = B/Nt` held fixed.
//!
//! Rates are in bits. The received power per transmit antenna after
//! quantizing with `x` normalized bits converges to `gamma_inf(x)`; the rate
//! difference of a `K`-block interval averages the decayed log-powers.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::{IntervalOptimum, DEFAULT_K_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeSystemConfig {
    pub nr_bar: f64,
    pub b_bar: f64,
    pub alpha: f64,
    pub k_max: usize,
}

impl LargeSystemConfig {
    pub fn new(nr_bar: f64, b_bar: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            nr_bar,
            b_bar,
            alpha,
            k_max: DEFAULT_K_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nr_bar >= 0.0 && self.nr_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nr_bar={} must be >= 0",
                self.nr_bar
            )));
        }
        if !(self.b_bar > 0.0 && self.b_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "b_bar={} must be > 0",
                self.b_bar
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha={} outside [0, 1]",
                self.alpha
            )));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized bit level where the fixed-point branch hands over to the
/// closed-form branch.
pub fn beta_threshold(nr_bar: f64) -> Result<f64> {
    if !(nr_bar > 0.0 && nr_bar.is_finite()) {
        return Err(Error::Domain(format!(
            "beta threshold needs nr_bar > 0, got {nr_bar}"
        )));
    }
    let s = nr_bar.sqrt();
    Ok((nr_bar * (s / (1.0 + s)).ln() + s) / LN_2)
}

/// `ln(g^n e^{-g}) - ln(2^{-x} (n/e)^n)`, decreasing in `g` for `g >= n`.
fn fixed_point_log_residual(g: f64, x: f64, n: f64) -> f64 {
    n * g.ln() - g + x * LN_2 - n * (n.ln() - 1.0)
}

/// Residual of the fixed-point equation in the linear domain.
pub fn fixed_point_residual(g: f64, x: f64, nr_bar: f64) -> f64 {
    let n = nr_bar;
    g.powf(n) * (-g).exp() - (-x * LN_2).exp() * (n / std::f64::consts::E).powf(n)
}

/// Asymptotic normalized received power after quantizing with `x` bits per
/// transmit antenna.
pub fn gamma_infinity(x: f64, nr_bar: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("x={x} must be >= 0")));
    }
    if !(nr_bar >= 0.0 && nr_bar.is_finite()) {
        return Err(Error::Domain(format!("nr_bar={nr_bar} must be >= 0")));
    }
    if nr_bar == 0.0 {
        return Ok(-(-x * LN_2).exp_m1());
    }
    let beta = beta_threshold(nr_bar)?;
    let s = nr_bar.sqrt();
    let top = (1.0 + s) * (1.0 + s);
    if x > beta {
        let e = 0.5 * nr_bar * nr_bar.ln() - (nr_bar - 1.0) * (1.0 + s).ln() + s - x * LN_2;
        return Ok(top - e.exp());
    }
    if x == 0.0 {
        return Ok(nr_bar);
    }
    let (mut lo, mut hi) = (nr_bar, top);
    let (f_lo, f_hi) = (
        fixed_point_log_residual(lo, x, nr_bar),
        fixed_point_log_residual(hi, x, nr_bar),
    );
    if f_lo < 0.0 || f_hi > 1e-12 {
        return Err(Error::Bracket(format!(
            "no root in [{lo}, {hi}] for x={x}, nr_bar={nr_bar}"
        )));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fixed_point_log_residual(mid, x, nr_bar) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Asymptotic rate difference (bits) of a `K`-block interval.
///
/// Returns `-inf` in the MISO limit when `alpha = 0` and `K > 1`.
pub fn rate_difference_large(k: usize, cfg: &LargeSystemConfig) -> Result<f64> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Domain("interval length must be >= 1".into()));
    }
    let x = cfg.b_bar * k as f64;
    let g = gamma_infinity(x, cfg.nr_bar)?;
    if cfg.nr_bar == 0.0 {
        let decay = if k == 1 {
            0.0
        } else {
            (k as f64 - 1.0) * cfg.alpha.log2()
        };
        return Ok(decay + g.log2());
    }
    let a2 = cfg.alpha * cfg.alpha;
    let mut w = 1.0;
    let mut sum = 0.0;
    for _ in 0..k {
        sum += (cfg.nr_bar + w * (g - cfg.nr_bar)).log2();
        w *= a2;
    }
    Ok(sum / k as f64)
}

pub fn optimal_interval_large(cfg: &LargeSystemConfig) -> Result<IntervalOptimum> {
    cfg.validate()?;
    let curve = (1..=cfg.k_max)
        .map(|k| rate_difference_large(k, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalOptimum::from_curve(curve))
}

/// Continuous-K approximation of the MISO optimal interval.
pub fn miso_interval_approx(b_bar: f64, alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if b_bar.is_nan() || b_bar <= 0.0 {
        return Err(Error::Domain(format!("b_bar={b_bar} must be > 0")));
    }
    Ok((b_bar * LN_2 / (1.0 / alpha).ln()).ln_1p() / (b_bar * LN_2))
}

/// Small-feedback rule of thumb `ln 2 / ln(1/alpha)`.
///
/// This sits a factor `ln 2` below the `b_bar -> 0` limit of
/// [`miso_interval_approx`], which is `1 / ln(1/alpha)`.
pub fn miso_interval_limit(alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    Ok(LN_2 / (1.0 / alpha).ln())
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha={alpha} must lie in (0, 1)")))
    }
}

/// Every `K in [2, k_max]` whose asymptotic rate difference beats `K = 1`.
pub fn afp_beats_mfp_large(cfg: &LargeSystemConfig) -> Result<Vec<usize>> {
    let curve = optimal_interval_large(cfg)?.curve;
    Ok((2..=cfg.k_max)
        .filter(|&k| curve[k - 1] > curve[0])
        .collect())
}
