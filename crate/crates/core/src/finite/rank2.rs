//! Distribution of `v^H diag(l1, l2, 0, ..., 0) v` for isotropic unit
//! `v in C^nt`, `nt > 2`, and the ordered-eigenvalue density of a 2x2
//! complex Wishart spectrum.

use crate::error::{Error, Result};
use crate::quadrature::{try_integrate_graded, QuadratureSpec};
use crate::special::ln_factorial;

/// Below this relative gap the smaller eigenvalue is nudged to
/// `l1 * (1 - DEGENERATE_GAP)` so the divided differences stay finite.
pub const DEGENERATE_GAP: f64 = 1e-7;

fn check_args(x: f64, l1: f64, l2: f64, nt: u32) -> Result<()> {
    if nt <= 2 {
        return Err(Error::Domain(format!("rank-2 law needs nt > 2, got {nt}")));
    }
    if !(l2 > 0.0 && l1 >= l2 && l1.is_finite()) {
        return Err(Error::Domain(format!(
            "need l1 >= l2 > 0, got l1={l1}, l2={l2}"
        )));
    }
    if !(0.0..=l1).contains(&x) {
        return Err(Error::Domain(format!("x={x} outside [0, {l1}]")));
    }
    Ok(())
}

fn separate(l1: f64, l2: f64) -> f64 {
    if (l1 - l2) < DEGENERATE_GAP * l1 {
        l1 * (1.0 - DEGENERATE_GAP)
    } else {
        l2
    }
}

/// CDF without argument checks; `l2` must already be separated from `l1`.
pub(crate) fn cdf_unchecked(x: f64, l1: f64, l2: f64, nt: u32) -> f64 {
    let n = (nt - 1) as i32;
    let gap = l1 - l2;
    let v = if x <= l2 {
        1.0 - l1 / gap * (1.0 - x / l1).powi(n) + l2 / gap * (1.0 - x / l2).powi(n)
    } else {
        1.0 - (l1 - x).powi(n) / (gap * l1.powi(n - 1))
    };
    v.clamp(0.0, 1.0)
}

pub fn cdf_rank2(x: f64, lambda1: f64, lambda2: f64, nt: u32) -> Result<f64> {
    check_args(x, lambda1, lambda2, nt)?;
    let l2 = separate(lambda1, lambda2);
    Ok(cdf_unchecked(x, lambda1, l2, nt))
}

pub fn pdf_rank2(x: f64, lambda1: f64, lambda2: f64, nt: u32) -> Result<f64> {
    check_args(x, lambda1, lambda2, nt)?;
    let l1 = lambda1;
    let l2 = separate(lambda1, lambda2);
    let n = (nt - 1) as i32;
    let gap = l1 - l2;
    let v = if x <= l2 {
        n as f64 / gap * ((1.0 - x / l1).powi(n - 1) - (1.0 - x / l2).powi(n - 1))
    } else {
        n as f64 * (l1 - x).powi(n - 1) / (gap * l1.powi(n - 1))
    };
    Ok(v.max(0.0))
}

/// Joint density of the two ordered nonzero eigenvalues of `H^H H` where the
/// larger channel dimension is `n`.
pub fn eigen_joint_pdf(lambda1: f64, lambda2: f64, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if !(lambda1 >= lambda2 && lambda2 >= 0.0) {
        return Err(Error::Domain(format!(
            "need l1 >= l2 >= 0, got l1={lambda1}, l2={lambda2}"
        )));
    }
    Ok(joint_pdf_unchecked(lambda1, lambda2, n, ln_joint_norm(n)))
}

pub(crate) fn ln_joint_norm(n: u32) -> f64 {
    -(ln_factorial(n - 1) + ln_factorial(n - 2))
}

pub(crate) fn joint_pdf_unchecked(l1: f64, l2: f64, n: u32, ln_norm: f64) -> f64 {
    let d = l1 - l2;
    if d <= 0.0 {
        return 0.0;
    }
    let k = (n - 2) as f64;
    let ln_poly = if n == 2 { 0.0 } else { k * (l1.ln() + l2.ln()) };
    (ln_poly + ln_norm - l1 - l2).exp() * d * d
}

/// `2^bits` as `(N, 1 / (N + 1))`, with the reciprocal computed in the log
/// domain so large budgets do not lose it.
pub(crate) fn codebook_size(total_bits: f64) -> (f64, f64) {
    let p = (-total_bits * std::f64::consts::LN_2).exp();
    (total_bits.exp2(), p / (1.0 + p))
}

/// `int_0^{l1} F(x)^N dx` for the rank-2 law, so that the expected maximum of
/// `N` i.i.d. draws is `l1` minus this value.
pub(crate) fn cdf_power_integral(
    l1: f64,
    l2: f64,
    nt: u32,
    size: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let l2 = separate(l1, l2);
    let n = (nt - 1) as i32;
    let gap = l1 - l2;
    let scale_c = gap * l1.powi(n - 1);

    // Upper branch in t = l1 - x on [0, gap]:
    // ln F = ln(1 - t^n / c), smooth near t = 0 where F^N has its layer.
    let upper = {
        let layer = (scale_c / size).powf(1.0 / n as f64);
        try_integrate_graded(
            |t| {
                let u = t.powi(n) / scale_c;
                Ok(if u >= 1.0 {
                    0.0
                } else {
                    (size * (-u).ln_1p()).exp()
                })
            },
            0.0,
            gap,
            layer,
            quad,
        )?
    };

    // Lower branch in u = l2 - x on [0, l2]. Skip when F(l2)^N is negligible.
    let f_top = cdf_unchecked(l2, l1, l2, nt);
    let top_pow = if f_top <= 0.0 {
        0.0
    } else {
        (size * f_top.ln()).exp()
    };
    let lower = if l2 * top_pow < 1e-18 {
        0.0
    } else {
        let dens = n as f64 * (1.0 - l2 / l1).powi(n - 1) / gap;
        let layer = 1.0 / (size * dens);
        try_integrate_graded(
            |u| {
                let f = cdf_unchecked(l2 - u, l1, l2, nt);
                Ok(if f <= 0.0 { 0.0 } else { (size * f.ln()).exp() })
            },
            0.0,
            l2,
            layer,
            quad,
        )?
    };
    Ok(upper + lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::RandomStream;

    #[test]
    fn cdf_endpoints_and_example() {
        for nt in [3, 4, 6] {
            assert_eq!(cdf_rank2(0.0, 2.0, 1.0, nt).unwrap(), 0.0);
            assert!((cdf_rank2(2.0, 2.0, 1.0, nt).unwrap() - 1.0).abs() < 1e-15);
        }
        // 1 - 2 (0.75)^2 + (0.5)^2
        assert!((cdf_rank2(0.5, 2.0, 1.0, 3).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cdf_continuous_at_lambda2() {
        for nt in [3, 4, 5, 8] {
            for (l1, l2) in [(2.0, 1.0), (5.0, 4.9), (10.0, 0.1), (3.3, 0.7)] {
                let n = (nt - 1) as i32;
                let gap: f64 = l1 - l2;
                let lower = 1.0 - l1 / gap * (1.0 - l2 / l1).powi(n);
                let upper = cdf_unchecked(l2, l1, l2, nt);
                let expect = 1.0 - gap.powi(n) / (gap * l1.powi(n - 1));
                assert!((lower - upper).abs() < 1e-12);
                assert!((upper - expect).abs() < 1e-12);
                let eps = 1e-13 * l1;
                let left = cdf_rank2(l2 - eps, l1, l2, nt).unwrap();
                let right = cdf_rank2(l2 + eps, l1, l2, nt).unwrap();
                assert!((left - right).abs() < 1e-11, "{nt} {l1} {l2}");
            }
        }
    }

    #[test]
    fn cdf_rejects_bad_domain() {
        assert!(cdf_rank2(-0.1, 2.0, 1.0, 3).is_err());
        assert!(cdf_rank2(2.1, 2.0, 1.0, 3).is_err());
        assert!(cdf_rank2(0.5, 1.0, 2.0, 3).is_err());
        assert!(cdf_rank2(0.5, 2.0, 1.0, 2).is_err());
        assert!(pdf_rank2(0.5, 2.0, 0.0, 3).is_err());
    }

    #[test]
    fn cdf_degenerate_eigenvalues() {
        let v = cdf_rank2(1.0, 2.0, 2.0, 4).unwrap();
        let w = cdf_rank2(1.0, 2.0, 2.0 * (1.0 - 1e-6), 4).unwrap();
        assert!(v.is_finite() && (v - w).abs() < 1e-5);
    }

    #[test]
    fn pdf_example_and_normalization() {
        assert!((pdf_rank2(0.5, 2.0, 1.0, 3).unwrap() - 0.5).abs() < 1e-15);
        let spec = QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            ..QuadratureSpec::default()
        };
        for nt in [3, 4, 6] {
            for (l1, l2) in [(2.0, 1.0), (5.0, 4.9), (10.0, 0.1)] {
                let total = integrate(|x| pdf_rank2(x, l1, l2, nt).unwrap(), 0.0, l2, &spec)
                    .unwrap()
                    + integrate(|x| pdf_rank2(x, l1, l2, nt).unwrap(), l2, l1, &spec).unwrap();
                assert!((total - 1.0).abs() < 1e-6, "{nt} {l1} {l2}: {total}");
            }
        }
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        let h = 1e-5;
        for nt in [3, 4, 6] {
            for (l1, l2) in [(2.0, 1.0), (10.0, 0.1), (4.0, 3.0)] {
                for i in 1..40 {
                    let x = l1 * i as f64 / 40.0;
                    if (x - l2).abs() < 2.0 * h {
                        continue;
                    }
                    let fd = (cdf_rank2(x + h, l1, l2, nt).unwrap()
                        - cdf_rank2(x - h, l1, l2, nt).unwrap())
                        / (2.0 * h);
                    let p = pdf_rank2(x, l1, l2, nt).unwrap();
                    assert!((fd - p).abs() < 1e-5 * p.max(1.0), "{nt} {l1} {l2} {x}");
                }
            }
        }
    }

    #[test]
    fn cdf_monte_carlo_example() {
        // P(2|v1|^2 + |v2|^2 <= 0.5) for isotropic v in C^3.
        let mut rng = RandomStream::new(31, 0);
        let n = 200_000;
        let mut hit = 0usize;
        for _ in 0..n {
            let v: Vec<_> = (0..3).map(|_| rng.complex_gaussian()).collect();
            let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (2.0 * v[0].norm_sqr() + v[1].norm_sqr()) / s <= 0.5 {
                hit += 1;
            }
        }
        assert!((hit as f64 / n as f64 - 0.125).abs() < 0.005);
    }

    #[test]
    fn joint_pdf_values() {
        assert_eq!(eigen_joint_pdf(1.5, 1.5, 3).unwrap(), 0.0);
        assert!((eigen_joint_pdf(1.0, 0.0, 2).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(eigen_joint_pdf(1.0, 2.0, 2).is_err());
    }

    #[test]
    fn joint_pdf_normalized() {
        let spec = QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            ..QuadratureSpec::default()
        };
        for n in [2, 3, 4, 6] {
            let total = integrate(
                |l1| integrate(|l2| eigen_joint_pdf(l1, l2, n).unwrap(), 0.0, l1, &spec).unwrap(),
                0.0,
                80.0,
                &spec,
            )
            .unwrap();
            assert!((total - 1.0).abs() < 1e-8, "n={n}: {total}");
        }
    }

    #[test]
    fn cdf_power_integral_matches_direct_quadrature() {
        let spec = QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_subdivisions: 2000,
            ..QuadratureSpec::default()
        };
        for nt in [3, 5] {
            for (l1, l2) in [(2.0, 1.0), (6.0, 5.5), (9.0, 0.3)] {
                for bits in [0.0, 1.0, 3.0, 8.0] {
                    let (size, _) = codebook_size(bits);
                    let got = cdf_power_integral(l1, l2, nt, size, &spec).unwrap();
                    let direct = integrate(
                        |x| cdf_rank2(x, l1, l2, nt).unwrap().powf(size),
                        0.0,
                        l2,
                        &spec,
                    )
                    .unwrap()
                        + integrate(
                            |x| cdf_rank2(x, l1, l2, nt).unwrap().powf(size),
                            l2,
                            l1,
                            &spec,
                        )
                        .unwrap();
                    assert!((got - direct).abs() < 1e-9, "{nt} {l1} {l2} {bits}");
                }
            }
        }
    }

    #[test]
    fn cdf_power_integral_zero_bits_is_mean_gap() {
        // With one codeword E[v^H L v] = (l1 + l2)/nt, so the integral is
        // l1 - (l1 + l2)/nt.
        let spec = QuadratureSpec::default();
        let (l1, l2, nt) = (3.0, 1.2, 4);
        let v = cdf_power_integral(l1, l2, nt, 1.0, &spec).unwrap();
        assert!((v - (l1 - (l1 + l2) / nt as f64)).abs() < 1e-9);
    }
}
