//! Monte Carlo checks of the closed forms against independently drawn samples.

use fbint::channel::{gram_eigenvalues, received_power, sample_channel};
use fbint::codebook::random_unit_vector_into;
use fbint::finite::{cdf_rank2, decay_power_2xnr, gamma_ntx2, mean_top_eigenvalue};
use fbint::quadrature::QuadratureSpec;
use fbint::simulator::{
    analytic_value, run_trial, simulate, simulate_with, sweep_with, Estimate, ExperimentSpec,
    Metric,
};
use fbint::{Execution, FadingModel, RandomStream, SystemShape};
use num_complex::Complex64;

fn shape(nt: usize, nr: usize) -> SystemShape {
    SystemShape::new(nt, nr).unwrap()
}

#[test]
fn rank2_cdf_passes_kolmogorov_smirnov() {
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    for nt in [3usize, 4, 6] {
        for (l1, l2) in [(2.0, 1.0), (5.0, 4.9), (10.0, 0.1)] {
            let mut rng = RandomStream::new(11, nt as u64);
            let mut v = vec![Complex64::new(0.0, 0.0); nt];
            let mut xs: Vec<f64> = (0..n)
                .map(|_| {
                    random_unit_vector_into(&mut v, &mut rng);
                    l1 * v[0].norm_sqr() + l2 * v[1].norm_sqr()
                })
                .collect();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = cdf_rank2(x.min(l1), l1, l2, nt as u32).unwrap();
                    (f - i as f64 / n as f64)
                        .abs()
                        .max((f - (i + 1) as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "nt={nt} ({l1},{l2}): D={d} >= {critical}");
        }
    }
}

#[test]
fn independent_direction_sees_nr_on_average() {
    let n = 100_000;
    for (nt, nr) in [(2, 2), (3, 2), (2, 4)] {
        let mut rng = RandomStream::new(5, (nt * 10 + nr) as u64);
        let mut v = vec![Complex64::new(0.0, 0.0); nt];
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                random_unit_vector_into(&mut v, &mut rng);
                let w = sample_channel(shape(nt, nr), &mut rng);
                received_power(&w, &v).unwrap()
            })
            .collect();
        let e = Estimate::from_samples(&xs);
        assert!(e.covers(nr as f64, 3.0), "{nt}x{nr}: {e:?}");
    }
}

#[test]
fn per_block_decay_matches_trajectories() {
    let trials = 40_000;
    let (nr, bits, alpha, k) = (3usize, 2.0, 0.8, 6usize);
    let spec = ExperimentSpec::new(
        shape(2, nr),
        FadingModel::with_alpha(alpha).unwrap(),
        bits,
        k,
    )
    .with_trials(trials)
    .with_seed(17);
    let per_block: Vec<Vec<f64>> = (0..trials as u64)
        .map(|t| run_trial(&spec, None, t, |_| {}).unwrap())
        .collect();
    for block in 1..=k {
        let xs: Vec<f64> = per_block.iter().map(|p| p[block - 1]).collect();
        let e = Estimate::from_samples(&xs);
        let want = decay_power_2xnr(nr as u32, bits * k as f64, alpha, block).unwrap();
        assert!(e.covers(want, 4.0), "block {block}: {e:?} vs {want}");
    }
}

#[test]
fn top_eigenvalue_mean_matches_sampling() {
    let n = 50_000;
    for m in [2usize, 3, 5] {
        let mut rng = RandomStream::new(23, m as u64);
        let xs: Vec<f64> = (0..n)
            .map(|_| gram_eigenvalues(&sample_channel(shape(2, m), &mut rng))[0])
            .collect();
        let e = Estimate::from_samples(&xs);
        assert!(
            e.covers(mean_top_eigenvalue(m as u32).unwrap(), 4.0),
            "n={m}: {e:?}"
        );
    }
}

#[test]
fn ntx2_gamma_matches_simulation() {
    for (nt, bits) in [(3usize, 2u32), (4, 1)] {
        let spec = ExperimentSpec::new(
            shape(nt, 2),
            FadingModel::with_alpha(0.5).unwrap(),
            bits as f64,
            1,
        )
        .with_trials(40_000)
        .with_seed(29);
        let e = simulate(&spec).unwrap();
        let g = gamma_ntx2(nt as u32, bits as f64, &QuadratureSpec::default()).unwrap();
        assert!(e.covers(g, 4.0), "{nt}x2 B={bits}: {e:?} vs {g}");
    }
}

#[test]
fn sweep_agrees_with_closed_forms() {
    let grid: Vec<_> = [(2usize, 2usize), (2, 4), (4, 2)]
        .into_iter()
        .flat_map(|(nt, nr)| {
            (1..=6).map(move |k| {
                ExperimentSpec::new(shape(nt, nr), FadingModel::with_alpha(0.8).unwrap(), 1.0, k)
                    .with_trials(5_000)
                    .with_seed(31)
                    .with_metric(Metric::NormalizedPower)
            })
        })
        .collect();
    let records = sweep_with(&grid, Execution::default()).unwrap();
    let covered = records
        .iter()
        .filter(|r| r.estimate.unwrap().covers(r.analytic.unwrap(), 3.0))
        .count();
    assert!(
        covered * 100 >= 95 * records.len(),
        "{covered}/{}",
        records.len()
    );
    assert_eq!(analytic_value(&grid[0]), records[0].analytic);
}

#[test]
fn stderr_shrinks_with_square_root_of_trials() {
    let base = ExperimentSpec::new(shape(2, 2), FadingModel::with_alpha(0.9).unwrap(), 1.0, 3)
        .with_seed(41);
    let small = simulate(&base.with_trials(5_000)).unwrap();
    let large = simulate(&base.with_trials(20_000)).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn execution_mode_does_not_change_results() {
    let spec = ExperimentSpec::new(shape(3, 2), FadingModel::with_alpha(0.9).unwrap(), 1.0, 4)
        .with_trials(3_000)
        .with_seed(7);
    let seq = simulate_with(&spec, Execution::Sequential).unwrap();
    let par = simulate_with(&spec, Execution::Parallel).unwrap();
    assert_eq!(seq.mean.to_bits(), par.mean.to_bits());
    assert_eq!(seq.stderr.to_bits(), par.stderr.to_bits());
}

#[cfg(feature = "parallel")]
#[test]
fn worker_count_does_not_change_results() {
    let spec = ExperimentSpec::new(shape(2, 3), FadingModel::with_alpha(0.8).unwrap(), 2.0, 3)
        .with_trials(4_000)
        .with_seed(3)
        .with_metric(Metric::RateDifference);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_with(&spec, Execution::Parallel).unwrap())
    };
    let one = run(1);
    for threads in [2, 4, 7] {
        assert_eq!(run(threads), one, "{threads} threads");
    }
}
