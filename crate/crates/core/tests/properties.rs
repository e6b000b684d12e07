use fbint::channel::{gram_eigenvalues, received_power, sample_channel};
use fbint::codebook::{chordal_distance, random_unit_vector_into, rvq_generate, Codebook};
use fbint::exec::pairwise_sum;
use fbint::finite::{
    avg_power, cdf_rank2, gamma_2xnr, interval_decay_average, pdf_rank2, AfpConfig,
};
use fbint::large::{gamma_infinity, rate_difference_large, LargeSystemConfig};
use fbint::{FadingModel, RandomStream, SystemShape};
use num_complex::Complex64;
use proptest::prelude::*;

fn eigen_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.01f64..20.0, 0.0f64..1.0).prop_map(|(l1, t)| (l1, (l1 * t).max(1e-6)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_monotone_bounded((l1, l2) in eigen_pair(), nt in 3u32..9, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f_lo = cdf_rank2(lo * l1, l1, l2, nt).unwrap();
        let f_hi = cdf_rank2(hi * l1, l1, l2, nt).unwrap();
        prop_assert!((0.0..=1.0).contains(&f_lo));
        prop_assert!((0.0..=1.0).contains(&f_hi));
        prop_assert!(f_hi + 1e-12 >= f_lo);
        prop_assert!(cdf_rank2(0.0, l1, l2, nt).unwrap() < 1e-12);
        prop_assert!((cdf_rank2(l1, l1, l2, nt).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_continuous_at_second_eigenvalue((l1, l2) in eigen_pair(), nt in 3u32..9) {
        prop_assume!((l1 - l2) / l1 > 1e-3);
        let below = cdf_rank2(l2 * (1.0 - 1e-13), l1, l2, nt).unwrap();
        let at = cdf_rank2(l2, l1, l2, nt).unwrap();
        let above = cdf_rank2((l2 * (1.0 + 1e-13)).min(l1), l1, l2, nt).unwrap();
        prop_assert!((below - at).abs() < 1e-10);
        prop_assert!((above - at).abs() < 1e-10);
    }

    #[test]
    fn pdf_nonnegative((l1, l2) in eigen_pair(), nt in 3u32..9, t in 0.0f64..1.0) {
        prop_assert!(pdf_rank2(t * l1, l1, l2, nt).unwrap() >= 0.0);
    }

    #[test]
    fn gamma_2xnr_increasing(nr in 2u32..12, b in 0.0f64..30.0, db in 0.01f64..5.0) {
        let g0 = gamma_2xnr(nr, b).unwrap();
        let g1 = gamma_2xnr(nr, b + db).unwrap();
        prop_assert!(g1 >= g0);
        prop_assert!(g0 >= nr as f64 - 1e-9);
    }

    #[test]
    fn avg_power_first_block_is_gamma(nr in 2usize..8, bits in 0.1f64..6.0, alpha in 0.0f64..=1.0) {
        let cfg = AfpConfig::new(
            SystemShape::new(2, nr).unwrap(),
            bits,
            FadingModel::with_alpha(alpha).unwrap(),
        ).unwrap();
        prop_assert_eq!(avg_power(&cfg, 1).unwrap(), gamma_2xnr(nr as u32, bits).unwrap());
    }

    #[test]
    fn avg_power_between_floor_and_gamma(nr in 2usize..8, bits in 0.1f64..4.0, alpha in 0.0f64..=1.0, k in 1usize..20) {
        let cfg = AfpConfig::new(
            SystemShape::new(2, nr).unwrap(),
            bits,
            FadingModel::with_alpha(alpha).unwrap(),
        ).unwrap();
        let p = avg_power(&cfg, k).unwrap();
        let g = gamma_2xnr(nr as u32, bits * k as f64).unwrap();
        prop_assert!(p >= nr as f64 - 1e-12 && p <= g + 1e-12);
    }

    #[test]
    fn decay_average_in_unit_interval(alpha in 0.0f64..=1.0, k in 1usize..200) {
        let d = interval_decay_average(alpha, k);
        prop_assert!(d > 0.0 && d <= 1.0);
    }

    #[test]
    fn eigenvalues_sum_to_frobenius(nt in 1usize..6, nr in 1usize..6, seed in any::<u64>()) {
        let shape = SystemShape::new(nt, nr).unwrap();
        let h = sample_channel(shape, &mut RandomStream::new(seed, 0));
        let ev = gram_eigenvalues(&h);
        prop_assert_eq!(ev.len(), nt.min(nr));
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(ev.iter().all(|&x| x >= 0.0));
        let total: f64 = ev.iter().sum();
        prop_assert!((total - h.frobenius_sqr()).abs() < 1e-9 * h.frobenius_sqr().max(1.0));
    }

    #[test]
    fn received_power_below_top_eigenvalue(nt in 1usize..6, nr in 1usize..6, seed in any::<u64>()) {
        let shape = SystemShape::new(nt, nr).unwrap();
        let mut rng = RandomStream::new(seed, 1);
        let h = sample_channel(shape, &mut rng);
        let mut v = vec![Complex64::new(0.0, 0.0); nt];
        random_unit_vector_into(&mut v, &mut rng);
        let p = received_power(&h, &v).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert!(p <= gram_eigenvalues(&h)[0] * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn chordal_distance_symmetric_bounded(nt in 1usize..8, seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 2);
        let mut a = vec![Complex64::new(0.0, 0.0); nt];
        let mut b = a.clone();
        random_unit_vector_into(&mut a, &mut rng);
        random_unit_vector_into(&mut b, &mut rng);
        let d = chordal_distance(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - chordal_distance(&b, &a)).abs() < 1e-15);
        prop_assert!(chordal_distance(&a, &a) < 1e-7);
    }

    #[test]
    fn codebook_bytes_round_trip(nt in 1usize..6, bits in 0u32..6, seed in any::<u64>()) {
        let cb = rvq_generate(nt, bits, &mut RandomStream::new(seed, 3)).unwrap();
        let back = Codebook::from_bytes(&cb.to_bytes()).unwrap();
        prop_assert_eq!(back, cb);
    }

    #[test]
    fn pairwise_sum_close_to_naive(xs in proptest::collection::vec(-1e6f64..1e6, 0..500)) {
        let naive: f64 = xs.iter().sum();
        let scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gamma_infinity_monotone_bounded(n in 0.0f64..6.0, x in 0.0f64..20.0, dx in 0.0f64..2.0) {
        let g0 = gamma_infinity(x, n).unwrap();
        let g1 = gamma_infinity(x + dx, n).unwrap();
        let top = (1.0 + n.sqrt()).powi(2);
        prop_assert!(g1 + 1e-9 >= g0);
        prop_assert!(g1 <= top + 1e-12);
    }

    #[test]
    fn rate_difference_grows_with_feedback(n in 0.1f64..4.0, b in 0.05f64..2.0, db in 0.0f64..1.0, alpha in 0.0f64..=1.0, k in 1usize..20) {
        let lo = LargeSystemConfig::new(n, b, alpha).unwrap();
        let hi = LargeSystemConfig::new(n, b + db, alpha).unwrap();
        let r_lo = rate_difference_large(k, &lo).unwrap();
        let r_hi = rate_difference_large(k, &hi).unwrap();
        prop_assert!(r_hi + 1e-12 >= r_lo);
        prop_assert!(r_hi <= (1.0 + n.sqrt()).powi(2).log2() + 1e-12);
    }
}
