//! Small special-function helpers.

use std::f64::consts::{FRAC_PI_4, PI};

const J0_SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind, order zero.
///
/// Power series up to |x| = 12, Hankel asymptotic expansion beyond, truncated
/// at its smallest term. Absolute error stays below 1e-10 on the real line.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= J0_SERIES_LIMIT {
        // sum_k (-1)^k (x^2/4)^k / (k!)^2
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= -q / (k * k);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > q.sqrt() {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        // a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k)
        let mut p = 1.0;
        let mut q = 0.0;
        let mut a = 1.0;
        let mut last = f64::INFINITY;
        let mut k = 1;
        loop {
            let next = a * ((2 * k - 1) as f64).powi(2) / (8.0 * k as f64 * x);
            if next.abs() >= last || next.abs() < 1e-17 {
                break;
            }
            last = next.abs();
            a = next;
            // Odd k feeds Q (leading term -1/(8x)), even k feeds P.
            match k % 4 {
                1 => q -= a,
                2 => p -= a,
                3 => q += a,
                _ => p += a,
            }
            k += 1;
        }
        let phase = x - FRAC_PI_4;
        (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
    }
}

/// ln(n!) by direct summation; exact enough for the small n used here.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
