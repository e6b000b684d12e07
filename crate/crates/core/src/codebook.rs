//! Beamforming codebooks and maximum-power codeword selection.
//!
//! RVQ codebooks hold i.i.d. isotropic unit vectors, each produced by
//! normalizing a CN(0, I) vector. Entries are drawn in index order, so
//! [`select_beamformer_streaming`] reproduces the materialized path exactly
//! when fed the same stream.

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::channel::{power_unchecked, ChannelMatrix, UNIT_NORM_TOL};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::RandomStream;

/// Largest codebook (in bits) that may be materialized in memory.
pub const MATERIALIZE_BITS_CAP: u32 = 24;
/// Largest codebook searched by the streaming selector.
pub const STREAMING_BITS_CAP: u32 = 30;
/// Pairwise-distance search is quadratic in the entry count.
pub const MAXIMIN_BITS_CAP: u32 = 10;
pub const DEFAULT_MAXIMIN_CANDIDATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Rvq,
    Maximin,
}

impl std::fmt::Display for CodebookKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CodebookKind::Rvq => "rvq",
            CodebookKind::Maximin => "maximin",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    nt: usize,
    bits: u32,
    kind: CodebookKind,
    /// Entry-major, `nt` values per entry.
    entries: Vec<Complex64>,
}

impl Codebook {
    pub fn new(nt: usize, bits: u32, kind: CodebookKind, entries: Vec<Complex64>) -> Result<Self> {
        if nt == 0 {
            return Err(Error::InvalidParameter(
                "codebook dimension must be positive".into(),
            ));
        }
        if bits > MATERIALIZE_BITS_CAP {
            return Err(Error::BitCap {
                bits,
                cap: MATERIALIZE_BITS_CAP,
            });
        }
        let count = 1usize << bits;
        if entries.len() != count * nt {
            return Err(Error::DimensionMismatch {
                expected: count * nt,
                actual: entries.len(),
            });
        }
        for v in entries.chunks_exact(nt) {
            let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (n2.sqrt() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm(n2));
            }
        }
        Ok(Self {
            nt,
            bits,
            kind,
            entries,
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        1 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entry(&self, i: usize) -> &[Complex64] {
        &self.entries[i * self.nt..(i + 1) * self.nt]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.entries.chunks_exact(self.nt)
    }

    /// The first `2^bits` entries as a smaller codebook.
    pub fn prefix(&self, bits: u32) -> Result<Codebook> {
        if bits > self.bits {
            return Err(Error::InvalidParameter(format!(
                "prefix of {bits} bits from a {}-bit codebook",
                self.bits
            )));
        }
        Ok(Codebook {
            nt: self.nt,
            bits,
            kind: self.kind,
            entries: self.entries[..(1usize << bits) * self.nt].to_vec(),
        })
    }

    /// Minimum pairwise chordal distance; `+inf` for a single entry.
    pub fn min_distance(&self) -> f64 {
        max_abs_inner_sqr(&self.entries, self.nt, f64::INFINITY)
            .map(|m| (1.0 - m).max(0.0).sqrt())
            .unwrap_or(f64::INFINITY)
    }

    pub fn to_record(&self) -> CodebookRecord {
        CodebookRecord {
            nt: self.nt,
            bits: self.bits,
            kind: self.kind,
            entries: self.entries.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_record(rec: &CodebookRecord) -> Result<Self> {
        if !rec.entries.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "odd number of interleaved values".into(),
            ));
        }
        let entries = rec
            .entries
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Self::new(rec.nt, rec.bits, rec.kind, entries)
    }

    /// Binary form: `b"FBCB"`, kind byte (0 = rvq, 1 = maximin), `nt` and
    /// `bits` as little-endian u32, then entry-major `(re, im)` f64 LE pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.entries.len() * 16);
        out.extend_from_slice(BINARY_MAGIC);
        out.push(match self.kind {
            CodebookKind::Rvq => 0,
            CodebookKind::Maximin => 1,
        });
        out.extend_from_slice(&(self.nt as u32).to_le_bytes());
        out.extend_from_slice(&self.bits.to_le_bytes());
        for z in &self.entries {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("codebook binary: {m}"));
        if bytes.len() < 13 || &bytes[..4] != BINARY_MAGIC {
            return Err(bad("missing header"));
        }
        let kind = match bytes[4] {
            0 => CodebookKind::Rvq,
            1 => CodebookKind::Maximin,
            _ => return Err(bad("unknown kind")),
        };
        let nt = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let bits = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        let body = &bytes[13..];
        if !body.len().is_multiple_of(16) {
            return Err(bad("truncated body"));
        }
        let entries = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::new(nt, bits, kind, entries)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"FBCB";

/// Flat, serializable codebook: real/imaginary parts interleaved, entry-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookRecord {
    pub nt: usize,
    pub bits: u32,
    pub kind: CodebookKind,
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub vector: Vec<Complex64>,
    pub power: f64,
}

/// Isotropic unit vector in C^nt, written into `out`.
pub fn random_unit_vector_into(out: &mut [Complex64], rng: &mut RandomStream) {
    loop {
        rng.fill_complex_gaussian(out);
        let n2: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        if n2 > 0.0 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|z| *z *= inv);
            return;
        }
    }
}

pub fn rvq_generate(nt: usize, bits: u32, rng: &mut RandomStream) -> Result<Codebook> {
    if bits > MATERIALIZE_BITS_CAP {
        return Err(Error::BitCap {
            bits,
            cap: MATERIALIZE_BITS_CAP,
        });
    }
    if nt == 0 {
        return Err(Error::InvalidParameter(
            "codebook dimension must be positive".into(),
        ));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); (1usize << bits) * nt];
    for v in entries.chunks_exact_mut(nt) {
        random_unit_vector_into(v, rng);
    }
    Ok(Codebook {
        nt,
        bits,
        kind: CodebookKind::Rvq,
        entries,
    })
}

/// Highest-power entry; ties go to the lowest index.
pub fn select_beamformer(h: &ChannelMatrix, codebook: &Codebook) -> Result<Selection> {
    let nt = h.shape().nt;
    if codebook.nt != nt {
        return Err(Error::DimensionMismatch {
            expected: nt,
            actual: codebook.nt,
        });
    }
    let (mut best, mut best_power) = (0, f64::NEG_INFINITY);
    for (i, v) in codebook.iter().enumerate() {
        let p = power_unchecked(h, v);
        if p > best_power {
            best = i;
            best_power = p;
        }
    }
    Ok(Selection {
        index: best,
        vector: codebook.entry(best).to_vec(),
        power: best_power,
    })
}

/// Draws `2^bits` RVQ entries one at a time and keeps the running argmax.
pub fn select_beamformer_streaming(
    h: &ChannelMatrix,
    nt: usize,
    bits: u32,
    rng: &mut RandomStream,
) -> Result<Selection> {
    if nt != h.shape().nt {
        return Err(Error::DimensionMismatch {
            expected: h.shape().nt,
            actual: nt,
        });
    }
    if bits > STREAMING_BITS_CAP {
        return Err(Error::BitCap {
            bits,
            cap: STREAMING_BITS_CAP,
        });
    }
    let mut cand = vec![Complex64::new(0.0, 0.0); nt];
    let mut best = vec![Complex64::new(0.0, 0.0); nt];
    let (mut best_index, mut best_power) = (0, f64::NEG_INFINITY);
    for i in 0..(1usize << bits) {
        random_unit_vector_into(&mut cand, rng);
        let p = power_unchecked(h, &cand);
        if p > best_power {
            best_power = p;
            best_index = i;
            best.copy_from_slice(&cand);
        }
    }
    Ok(Selection {
        index: best_index,
        vector: best,
        power: best_power,
    })
}

pub fn inner_abs_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
        .norm_sqr()
}

/// `sqrt(1 - |v1^H v2|^2)`, clamped into `[0, 1]`.
pub fn chordal_distance(v1: &[Complex64], v2: &[Complex64]) -> f64 {
    (1.0 - inner_abs_sqr(v1, v2)).clamp(0.0, 1.0).sqrt()
}

/// Largest `|<v_i, v_j>|^2` over pairs; `None` when fewer than two entries.
/// Stops early, returning the offending value, once it exceeds `abort_above`.
fn max_abs_inner_sqr(entries: &[Complex64], nt: usize, abort_above: f64) -> Option<f64> {
    let n = entries.len() / nt;
    if n < 2 {
        return None;
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let a = &entries[i * nt..(i + 1) * nt];
        for j in (i + 1)..n {
            let s = inner_abs_sqr(a, &entries[j * nt..(j + 1) * nt]);
            if s > worst {
                worst = s;
                if worst > abort_above {
                    return Some(worst);
                }
            }
        }
    }
    Some(worst)
}

const MAXIMIN_CHUNK: usize = 256;

/// Best-of-`candidates` random codebook under the maximin chordal criterion.
///
/// Candidate `i` is generated from stream `(base, i)` where `base` is drawn
/// from `rng`. Candidates are scored in fixed chunks; within a chunk a
/// candidate is abandoned as soon as one of its pairs is closer than the best
/// codebook from earlier chunks, so the result does not depend on threading.
pub fn maximin_codebook(
    nt: usize,
    bits: u32,
    candidates: usize,
    rng: &mut RandomStream,
) -> Result<Codebook> {
    maximin_codebook_with(nt, bits, candidates, rng, Execution::default())
}

pub fn maximin_codebook_with(
    nt: usize,
    bits: u32,
    candidates: usize,
    rng: &mut RandomStream,
    mode: Execution,
) -> Result<Codebook> {
    if bits > MAXIMIN_BITS_CAP {
        return Err(Error::BitCap {
            bits,
            cap: MAXIMIN_BITS_CAP,
        });
    }
    if candidates == 0 {
        return Err(Error::InvalidParameter(
            "need at least one candidate".into(),
        ));
    }
    let base = rng.next_u64();
    // Score = max |inner|^2, smaller is better.
    let mut best: Option<(usize, f64)> = None;
    let mut start = 0;
    while start < candidates {
        let len = MAXIMIN_CHUNK.min(candidates - start);
        let threshold = best.map(|(_, s)| s).unwrap_or(f64::INFINITY);
        let scores = map_indexed(len, mode, |off| {
            let idx = start + off;
            let cb = maximin_candidate(nt, bits, base, idx);
            let s = max_abs_inner_sqr(&cb.entries, nt, threshold).unwrap_or(0.0);
            if bits > 0 && s > threshold {
                None
            } else {
                Some(s)
            }
        });
        for (off, s) in scores.into_iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((start + off, s));
                }
            }
        }
        start += len;
    }
    let (idx, _) = best.expect("at least one candidate scored");
    let mut cb = maximin_candidate(nt, bits, base, idx);
    cb.kind = CodebookKind::Maximin;
    Ok(cb)
}

fn maximin_candidate(nt: usize, bits: u32, base: u64, index: usize) -> Codebook {
    let mut s = RandomStream::new(base, index as u64);
    rvq_generate(nt, bits, &mut s).expect("bits already capped")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gram_eigenvalues, received_power, sample_channel, SystemShape};

    fn shape(nt: usize, nr: usize) -> SystemShape {
        SystemShape::new(nt, nr).unwrap()
    }

    #[test]
    fn rvq_sizes_and_norms() {
        let mut rng = RandomStream::new(1, 0);
        let cb = rvq_generate(3, 0, &mut rng).unwrap();
        assert_eq!(cb.len(), 1);
        let cb = rvq_generate(4, 5, &mut rng).unwrap();
        assert_eq!(cb.len(), 32);
        for v in cb.iter() {
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            rvq_generate(2, 25, &mut rng),
            Err(Error::BitCap { .. })
        ));
    }

    #[test]
    fn rvq_coordinate_energy_is_uniform() {
        let mut rng = RandomStream::new(2, 0);
        let cb = rvq_generate(4, 17, &mut rng).unwrap();
        let n = cb.len() as f64;
        for i in 0..4 {
            let e: f64 = cb.iter().map(|v| v[i].norm_sqr()).sum::<f64>() / n;
            assert!((e - 0.25).abs() < 0.01, "coord {i}: {e}");
        }
    }

    #[test]
    fn rvq_deterministic() {
        let a = rvq_generate(3, 6, &mut RandomStream::new(77, 3)).unwrap();
        let b = rvq_generate(3, 6, &mut RandomStream::new(77, 3)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn selects_dominant_direction() {
        let mut rng = RandomStream::new(3, 0);
        let h = sample_channel(shape(2, 3), &mut rng);
        // Pad a random codebook with the exact dominant eigenvector.
        let lam = gram_eigenvalues(&h)[0];
        let (a, b) = {
            // H^H H = [[p, q], [q*, r]]; eigenvector for lam is (q, lam - p).
            let p: f64 = (0..3).map(|r| h.get(r, 0).norm_sqr()).sum();
            let q: Complex64 = (0..3).map(|r| h.get(r, 0).conj() * h.get(r, 1)).sum();
            let v = [q, Complex64::new(lam - p, 0.0)];
            let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            (v[0] / n, v[1] / n)
        };
        let mut cb = rvq_generate(2, 3, &mut rng).unwrap();
        cb.entries[10] = a;
        cb.entries[11] = b;
        let sel = select_beamformer(&h, &cb).unwrap();
        assert_eq!(sel.index, 5);
        assert!((sel.power - lam).abs() < 1e-9 * lam);
        assert!((received_power(&h, &sel.vector).unwrap() - sel.power).abs() < 1e-12);
    }

    #[test]
    fn zero_bits_selects_index_zero() {
        let mut rng = RandomStream::new(4, 0);
        for _ in 0..10 {
            let h = sample_channel(shape(3, 2), &mut rng);
            let cb = rvq_generate(3, 0, &mut rng).unwrap();
            assert_eq!(select_beamformer(&h, &cb).unwrap().index, 0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = RandomStream::new(5, 0);
        let h = sample_channel(shape(2, 2), &mut rng);
        let cb = rvq_generate(3, 2, &mut rng).unwrap();
        assert!(select_beamformer(&h, &cb).is_err());
        assert!(select_beamformer_streaming(&h, 3, 2, &mut rng).is_err());
    }

    #[test]
    fn streaming_equals_materialized() {
        let mut rng = RandomStream::new(6, 0);
        for bits in [0, 1, 4, 7] {
            let h = sample_channel(shape(3, 2), &mut rng);
            let cb = rvq_generate(3, bits, &mut RandomStream::new(99, bits as u64)).unwrap();
            let a = select_beamformer(&h, &cb).unwrap();
            let b =
                select_beamformer_streaming(&h, 3, bits, &mut RandomStream::new(99, bits as u64))
                    .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn one_bit_mean_power_2x2() {
        // gamma_{2x2}(1) = 3.5 - 3/3 = 2.5
        let mut rng = RandomStream::new(7, 0);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let h = sample_channel(shape(2, 2), &mut rng);
            acc += select_beamformer_streaming(&h, 2, 1, &mut rng)
                .unwrap()
                .power;
        }
        assert!((acc / n as f64 - 2.5).abs() < 0.02, "{}", acc / n as f64);
    }

    #[test]
    fn chordal_basics() {
        let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e2 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(chordal_distance(&e1, &e1), 0.0);
        assert_eq!(chordal_distance(&e1, &e2), 1.0);
        let mut rng = RandomStream::new(8, 0);
        let mut v = [Complex64::new(0.0, 0.0); 3];
        random_unit_vector_into(&mut v, &mut rng);
        let ph = Complex64::from_polar(1.0, 1.234);
        let w: Vec<Complex64> = v.iter().map(|z| z * ph).collect();
        assert!(chordal_distance(&v, &w) < 1e-7);
    }

    #[test]
    fn maximin_zero_bits_returns_first_candidate() {
        let mut rng = RandomStream::new(9, 0);
        let cb = maximin_codebook(3, 0, 50, &mut rng.clone()).unwrap();
        let base = rng.next_u64();
        let first = rvq_generate(3, 0, &mut RandomStream::new(base, 0)).unwrap();
        assert_eq!(cb.entries, first.entries);
        assert_eq!(cb.kind(), CodebookKind::Maximin);
        assert_eq!(cb.min_distance(), f64::INFINITY);
    }

    #[test]
    fn maximin_one_bit_is_nearly_orthogonal() {
        let mut rng = RandomStream::new(10, 0);
        let cb = maximin_codebook(2, 1, 10_000, &mut rng).unwrap();
        assert!(cb.min_distance() >= 0.95, "{}", cb.min_distance());
    }

    #[test]
    fn maximin_dominates_every_candidate() {
        let mut rng = RandomStream::new(11, 0);
        let candidates = 600;
        let cb = maximin_codebook(3, 3, candidates, &mut rng.clone()).unwrap();
        let base = rng.next_u64();
        let best = cb.min_distance();
        for i in 0..candidates {
            let c = rvq_generate(3, 3, &mut RandomStream::new(base, i as u64)).unwrap();
            assert!(best >= c.min_distance());
        }
    }

    #[test]
    fn maximin_independent_of_execution_mode() {
        let a = maximin_codebook_with(3, 4, 700, &mut RandomStream::new(1, 1), Execution::Parallel)
            .unwrap();
        let b = maximin_codebook_with(
            3,
            4,
            700,
            &mut RandomStream::new(1, 1),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(maximin_codebook(3, 11, 1, &mut RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let cb = rvq_generate(3, 4, &mut RandomStream::new(12, 0)).unwrap();
        assert_eq!(Codebook::from_bytes(&cb.to_bytes()).unwrap(), cb);
        assert_eq!(Codebook::from_record(&cb.to_record()).unwrap(), cb);
        assert!(Codebook::from_bytes(b"nope").is_err());
        let mut rec = cb.to_record();
        rec.entries[0] = 5.0;
        assert!(matches!(
            Codebook::from_record(&rec),
            Err(Error::NotUnitNorm(_))
        ));
    }
}
