//! Rayleigh MIMO channels with first-order Gauss-Markov time evolution.
//!
//! Entries of `H(k)` are i.i.d. CN(0, 1). Consecutive blocks are linked by
//! `H(k) = alpha * H(k-1) + sqrt(1 - alpha^2) * W(k)` with a fresh i.i.d.
//! innovation `W(k)`, which keeps the marginal distribution stationary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::special::bessel_j0;

/// Antenna counts: `nt` transmit, `nr` receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemShape {
    pub nt: usize,
    pub nr: usize,
}

impl SystemShape {
    pub fn new(nt: usize, nr: usize) -> Result<Self> {
        if nt == 0 || nr == 0 {
            return Err(Error::InvalidParameter(format!(
                "antenna counts must be positive (nt={nt}, nr={nr})"
            )));
        }
        Ok(Self { nt, nr })
    }

    /// Dimension of the smaller Gram matrix, i.e. the channel rank.
    pub fn rank(&self) -> usize {
        self.nt.min(self.nr)
    }
}

/// Temporal correlation `alpha` and linear-scale SNR `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    pub alpha: f64,
    pub rho: f64,
}

impl FadingModel {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive and finite, got {rho}"
            )));
        }
        Ok(Self { alpha, rho })
    }

    /// Model with unit SNR, for power-only computations.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }
}

/// One `nr x nt` channel realization, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    shape: SystemShape,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn from_entries(shape: SystemShape, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != shape.nr * shape.nt {
            return Err(Error::DimensionMismatch {
                expected: shape.nr * shape.nt,
                actual: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "channel entries must be finite".into(),
            ));
        }
        Ok(Self { shape, entries })
    }

    pub fn zeros(shape: SystemShape) -> Self {
        Self {
            shape,
            entries: vec![Complex64::new(0.0, 0.0); shape.nr * shape.nt],
        }
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entry `(row, col)` = gain from transmit antenna `col` to receive antenna `row`.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.shape.nt + col]
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// In-place Gauss-Markov step. `alpha == 1` leaves the matrix untouched
    /// and draws nothing from `rng`.
    pub fn evolve_in_place(&mut self, alpha: f64, rng: &mut RandomStream) {
        if alpha == 1.0 {
            return;
        }
        let innov = (1.0 - alpha * alpha).sqrt();
        for h in &mut self.entries {
            *h = *h * alpha + rng.complex_gaussian() * innov;
        }
    }
}

pub fn sample_channel(shape: SystemShape, rng: &mut RandomStream) -> ChannelMatrix {
    let mut entries = vec![Complex64::new(0.0, 0.0); shape.nr * shape.nt];
    rng.fill_complex_gaussian(&mut entries);
    ChannelMatrix { shape, entries }
}

pub fn evolve(prev: &ChannelMatrix, model: &FadingModel, rng: &mut RandomStream) -> ChannelMatrix {
    let mut next = prev.clone();
    next.evolve_in_place(model.alpha, rng);
    next
}

/// `k` consecutive blocks: an i.i.d. draw followed by `k - 1` evolve steps.
pub fn trajectory(
    model: &FadingModel,
    shape: SystemShape,
    k: usize,
    rng: &mut RandomStream,
) -> Result<Vec<ChannelMatrix>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "trajectory length must be >= 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(k);
    out.push(sample_channel(shape, rng));
    for i in 1..k {
        let next = evolve(&out[i - 1], model, rng);
        out.push(next);
    }
    Ok(out)
}

/// `||H v||^2` without the unit-norm check.
pub(crate) fn power_unchecked(h: &ChannelMatrix, v: &[Complex64]) -> f64 {
    let nt = h.shape.nt;
    h.entries
        .chunks_exact(nt)
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                .norm_sqr()
        })
        .sum()
}

pub(crate) const UNIT_NORM_TOL: f64 = 1e-9;

/// Received power `v^H H^H H v` for a unit-norm beamformer `v`.
pub fn received_power(h: &ChannelMatrix, v: &[Complex64]) -> Result<f64> {
    if v.len() != h.shape.nt {
        return Err(Error::DimensionMismatch {
            expected: h.shape.nt,
            actual: v.len(),
        });
    }
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (n2.sqrt() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm(n2));
    }
    Ok(power_unchecked(h, v))
}

/// Nonzero-spectrum eigenvalues of `H^H H`, descending.
///
/// Works on the smaller of `H^H H` and `H H^H`, so the eigenproblem is
/// `min(nt, nr)`-dimensional. Rank 1 and 2 are solved in closed form.
pub fn gram_eigenvalues(h: &ChannelMatrix) -> Vec<f64> {
    let SystemShape { nt, nr } = h.shape;
    let d = nt.min(nr);
    let mut g = vec![Complex64::new(0.0, 0.0); d * d];
    if nr < nt {
        // H H^H
        for i in 0..d {
            for j in i..d {
                let s: Complex64 = (0..nt).map(|c| h.get(i, c) * h.get(j, c).conj()).sum();
                g[i * d + j] = s;
                g[j * d + i] = s.conj();
            }
        }
    } else {
        // H^H H
        for i in 0..d {
            for j in i..d {
                let s: Complex64 = (0..nr).map(|r| h.get(r, i).conj() * h.get(r, j)).sum();
                g[i * d + j] = s;
                g[j * d + i] = s.conj();
            }
        }
    }
    let mut ev = hermitian_eigenvalues(&mut g, d);
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.iter_mut().for_each(|x| *x = x.max(0.0));
    ev
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigenvalues of a Hermitian `d x d` matrix (overwritten).
pub(crate) fn hermitian_eigenvalues(a: &mut [Complex64], d: usize) -> Vec<f64> {
    match d {
        0 => Vec::new(),
        1 => vec![a[0].re],
        2 => {
            let (p, r, b) = (a[0].re, a[3].re, a[1]);
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + b.norm_sqr()).sqrt();
            vec![mean + rad, mean - rad]
        }
        _ => {
            jacobi_sweeps(a, d);
            (0..d).map(|i| a[i * d + i].re).collect()
        }
    }
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the pivot
/// and then applies the real symmetric Jacobi rotation.
fn jacobi_sweeps(a: &mut [Complex64], d: usize) {
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if total == 0.0 {
        return;
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total {
            return;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let app = a[p * d + p].re;
                let aqq = a[q * d + q].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = D R with D = diag(1, e^{-i phi}) on (p, q).
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = akp * jpp + akq * jqp;
                    a[k * d + q] = akp * jpq + akq * jqq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * d + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p * d + q] = Complex64::new(0.0, 0.0);
                a[q * d + p] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Jakes/Clarke correlation `J0(2 pi f_D T_s)`. Not clamped: large arguments
/// give values in `[-0.41, 1]`, and callers decide how to map them to `[0, 1]`.
pub fn alpha_from_jakes(doppler_hz: f64, block_seconds: f64) -> f64 {
    bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * block_seconds)
}

/// Maximum Doppler shift for a terminal moving at `speed_kmh`.
pub fn doppler_from_speed(speed_kmh: f64, carrier_hz: f64) -> f64 {
    const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT
}
