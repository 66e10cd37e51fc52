//! Monte Carlo properties of the simulator and estimators. Seeds are fixed,
//! so every band below is a deterministic pass/fail check.

use std::time::Instant;

use meta_smooth::bench::{run_benchmark, BenchmarkConfig, ModelSpec, Target};
use meta_smooth::estimator::Estimator;
use meta_smooth::linalg::Matrix;
use meta_smooth::meta::{meta_fit, sample_autocov};
use meta_smooth::ml::{ml_fit, vma_nll, MlConfig};
use meta_smooth::model::{params_to_autocov, structural_to_reduced, ReducedParams};
use meta_smooth::scalar::{self, ScalarMA1Params, ScalarSeries};
use meta_smooth::series::SeriesMatrix;
use meta_smooth::simulate::{child_seed, difference, preset, simulate, SimulationSpec};

fn diffs(model: u32, len: usize, seed: u64) -> SeriesMatrix {
    difference(&simulate(&SimulationSpec::new(preset(model).unwrap(), len, seed)).unwrap()).unwrap()
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        0.5 * (xs[m - 1] + xs[m])
    } else {
        xs[m]
    }
}

/// Lag-`k` sample cross-covariance with `1/T` scaling (data assumed mean zero).
fn lag_cov(z: &SeriesMatrix, k: usize) -> Matrix {
    let n = z.cols();
    let mut c = Matrix::zeros(n, n);
    for t in k..z.rows() {
        let (a, b) = (z.row(t), z.row(t - k));
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += a[i] * b[j];
            }
        }
    }
    c / z.rows() as f64
}

#[test]
fn simulated_differences_have_model_autocovariances() {
    let z = diffs(1, 200_000, 1);
    let truth = params_to_autocov(&structural_to_reduced(&preset(1).unwrap()).unwrap()).unwrap();
    let want0 = Matrix::from_row_slice(2, 2, &[4.0, -0.8, -0.8, 3.5]);
    assert!(rel(&truth.gamma0, &want0) < 1e-12);

    assert!(rel(&lag_cov(&z, 0), &want0) < 0.03);
    let g1 = lag_cov(&z, 1);
    let g1_sym = (&g1 + g1.transpose()) * 0.5;
    assert!(rel(&g1_sym, &truth.gamma1) < 0.05);

    let t = z.rows() as f64;
    for j in 0..2 {
        let col = z.column(j);
        let mean = col.iter().sum::<f64>() / t;
        // long-run variance of an MA(1) is γ₀ + 2γ₁
        let lr = truth.gamma0[(j, j)] + 2.0 * truth.gamma1[(j, j)];
        assert!(mean.abs() < 4.0 * (lr / t).sqrt(), "component {j}: mean {mean}");
    }

    // beyond lag one the process is uncorrelated
    let g2 = lag_cov(&z, 2);
    for i in 0..2 {
        for j in 0..2 {
            let se = (truth.gamma0[(i, i)] * truth.gamma0[(j, j)] / t).sqrt() * 2.0;
            assert!(g2[(i, j)].abs() < 4.0 * se, "lag-2 entry ({i},{j}) = {}", g2[(i, j)]);
        }
    }
}

#[test]
fn lag_one_asymmetry_shrinks_with_sample_size() {
    let gap = |len: usize| {
        (0..20)
            .map(|s| {
                let g1 = lag_cov(&diffs(1, len, 100 + s), 1);
                (&g1 - g1.transpose()).norm()
            })
            .sum::<f64>()
    };
    assert!(gap(20_000) < gap(500));
}

#[test]
fn scalar_fit_concentrates_at_truth() {
    for seed in 0..20 {
        let x = scalar::simulate_ma1(&ScalarMA1Params { psi: 0.5, sigma: 1.0 }, 10_000, seed);
        let psi = scalar::fit(&ScalarSeries::new(x).unwrap()).unwrap().params.psi;
        assert!((0.45..=0.55).contains(&psi), "seed {seed}: {psi}");

        let x = scalar::simulate_ma1(&ScalarMA1Params { psi: 0.0, sigma: 1.0 }, 10_000, 1000 + seed);
        let psi = scalar::fit(&ScalarSeries::new(x).unwrap()).unwrap().params.psi;
        assert!(psi.abs() < 0.05, "seed {seed}: {psi}");
    }
}

#[test]
fn scalar_fit_error_shrinks_with_sample_size() {
    let p = ScalarMA1Params { psi: 0.6, sigma: 2.0 };
    let med = |len: usize| {
        median(
            (0..200)
                .map(|r| {
                    let x = scalar::simulate_ma1(&p, len, child_seed(5, &[len as u64, r]));
                    (scalar::fit(&ScalarSeries::new(x).unwrap()).unwrap().params.psi - p.psi).abs()
                })
                .collect(),
        )
    };
    let (short, long) = (med(200), med(2000));
    assert!(long < short, "{short} -> {long}");
}

#[test]
fn meta_on_a_long_sample_is_close_to_truth() {
    let truth = structural_to_reduced(&preset(1).unwrap()).unwrap();
    let g = params_to_autocov(&truth).unwrap();
    let z = diffs(1, 100_000, 21);
    let rep = meta_fit(&z).unwrap();
    assert!(rel(&rep.autocov.gamma0, &g.gamma0) < 0.05);
    assert!(rel(&rep.reduced.theta, &truth.theta) < 0.10);
    assert!(rep.diagnostics.boundary_weights.is_empty());
    assert!(rep.diagnostics.structural_valid);

    let (g0, _) = sample_autocov(&z);
    assert!(rel(&g0, &g.gamma0) < 0.05);
}

#[test]
fn meta_theta_error_is_roughly_gaussian() {
    let truth = structural_to_reduced(&preset(1).unwrap()).unwrap();
    let errs: Vec<f64> = (0..500)
        .map(|r| {
            let z = diffs(1, 2000, child_seed(31, &[r]));
            meta_fit(&z).unwrap().reduced.theta[(0, 0)] - truth.theta[(0, 0)]
        })
        .collect();
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let m2 = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let m3 = errs.iter().map(|e| (e - mean).powi(3)).sum::<f64>() / n;
    let m4 = errs.iter().map(|e| (e - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    assert!(skew.abs() < 0.5, "skewness {skew}");
    assert!(kurt.abs() < 1.0, "excess kurtosis {kurt}");
}

#[test]
fn true_parameters_beat_perturbed_ones_in_likelihood() {
    let truth = structural_to_reduced(&preset(1).unwrap()).unwrap();
    let bumped = ReducedParams::new(&truth.theta + Matrix::identity(2, 2) * 0.1, truth.sigma_u.clone()).unwrap();
    let wins = (0..100)
        .filter(|&r| {
            let z = diffs(1, 1001, child_seed(41, &[r]));
            vma_nll(&z, &truth).unwrap() < vma_nll(&z, &bumped).unwrap()
        })
        .count();
    assert!(wins >= 95, "{wins} of 100");
}

#[test]
fn ml_accuracy_band_on_model_1() {
    let res = run_benchmark(&BenchmarkConfig {
        models: vec![ModelSpec::Preset(1)],
        sample_sizes: vec![1000],
        replications: 100,
        estimators: vec![Estimator::Ml],
        master_seed: 7,
        output: None,
        fallback: false,
        jobs: None,
    })
    .unwrap();
    let row = res.find("1", 1000, Estimator::Ml, Target::Theta).unwrap();
    assert_eq!(row.failures, 0);
    assert!((0.071..=0.132).contains(&row.mean_rmse), "{}", row.mean_rmse);
}

fn timed<T>(f: impl FnOnce() -> T) -> f64 {
    let start = Instant::now();
    std::hint::black_box(f());
    start.elapsed().as_secs_f64()
}

#[test]
fn ml_is_slower_than_meta_and_grows_with_dimension() {
    let data3: Vec<SeriesMatrix> = (0..5).map(|s| diffs(3, 1000, 50 + s)).collect();
    let data1: Vec<SeriesMatrix> = (0..5).map(|s| diffs(1, 1000, 60 + s)).collect();
    let cfg = MlConfig::default();
    let meta3 = timed(|| data3.iter().map(|z| meta_fit(z).unwrap()).collect::<Vec<_>>());
    let ml3 = timed(|| data3.iter().map(|z| ml_fit(z, &cfg).unwrap()).collect::<Vec<_>>());
    let ml1 = timed(|| data1.iter().map(|z| ml_fit(z, &cfg).unwrap()).collect::<Vec<_>>());
    assert!(ml3 >= 3.0 * meta3, "ml {ml3} s vs meta {meta3} s");
    assert!(ml3 > ml1, "N=3 {ml3} s vs N=2 {ml1} s");
}

#[test]
fn meta_only_sweep_never_runs_ml() {
    let res = run_benchmark(&BenchmarkConfig {
        models: vec![ModelSpec::Preset(4)],
        sample_sizes: vec![1000],
        replications: 100,
        estimators: vec![Estimator::Meta],
        master_seed: 7,
        output: None,
        fallback: false,
        jobs: None,
    })
    .unwrap();
    assert!(res.rows.iter().all(|r| r.estimator == Estimator::Meta));
    let theta = res.find("4", 1000, Estimator::Meta, Target::Theta).unwrap().mean_rmse * 1000.0;
    assert!((21.0..=39.0).contains(&theta), "{theta}");
}
