mod common;

use common::{col, dotp, kkt_gap, random_instance};
use hdinfer::bootstrap::{lower_median, quantile_rank};
use hdinfer::debias::normal_quantile;
use hdinfer::{
    bootstrap_debiased, bootstrap_refits, ddb_estimate, debias, estimate_sigma_sq, fit_lasso, nodewise_direction,
    percentile_ci, pivots, plugin_ci, DebiasArtifacts, Matrix, RegressionData, SeedSpec, SolverConfig,
};
use proptest::prelude::*;

#[test]
fn debiased_estimate_matches_hand_assembly() {
    let (data, _, _) = random_instance(42, 30, 5, 2, 1.0, 0.5);
    let cfg = SolverConfig::default();
    let fit = fit_lasso(&data, 0.1, &cfg).unwrap();
    for j in 0..5 {
        let art = nodewise_direction(&data, j, 0.1, &cfg).unwrap();
        let est = debias(&data, &fit, &art).unwrap();
        let x = data.x();
        let r: Vec<f64> = (0..30)
            .map(|i| data.y()[i] - (0..5).map(|k| x[(i, k)] * fit.beta_hat[k]).sum::<f64>())
            .collect();
        let z: Vec<f64> = (0..30)
            .map(|i| x[(i, j)] - (0..5).filter(|&k| k != j).map(|k| x[(i, k)] * art.gamma_full()[k]).sum::<f64>())
            .collect();
        let expect = fit.beta_hat[j] + dotp(&z, &r) / dotp(&z, &col(x, j));
        assert!((est.beta_db - expect).abs() < 1e-12);
        assert_eq!(est.beta_db, est.beta_lasso + est.correction);
    }
}

#[test]
fn translation_along_support_leaves_direction_unchanged() {
    let (data, _, _) = random_instance(5, 40, 12, 3, 2.0, 1.0);
    let cfg = SolverConfig::default();
    let a = nodewise_direction(&data, 4, 0.2, &cfg).unwrap();
    let shifted = data.with_response(data.y().iter().map(|v| v + 10.0).collect()).unwrap();
    let b = nodewise_direction(&shifted, 4, 0.2, &cfg).unwrap();
    assert_eq!(a.z, b.z);
}

#[test]
fn zero_noise_bootstrap_is_a_point_mass() {
    let (data, _, _) = random_instance(9, 40, 15, 3, 2.0, 1.0);
    let cfg = SolverConfig::default();
    let fit = fit_lasso(&data, 0.2, &cfg).unwrap();
    let art = nodewise_direction(&data, 0, 0.2, &cfg).unwrap();
    let dist = bootstrap_debiased(&data, &fit, 0.0, &art, 25, SeedSpec::new(1, 0), &cfg).unwrap();
    let first = dist.draws[0];
    assert!(dist.draws.iter().all(|&d| (d - first).abs() < 1e-9));
    let est = debias(&data, &fit, &art).unwrap();
    let ci = percentile_ci(est.beta_db, &dist, 0.95).unwrap();
    assert!(ci.length() < 1e-9);
}

#[test]
fn bootstrap_is_deterministic_and_shared_refits_agree() {
    let (data, _, _) = random_instance(13, 50, 30, 4, 2.0, 1.0);
    let cfg = SolverConfig::default();
    let fit = fit_lasso(&data, 0.25, &cfg).unwrap();
    let sigma = estimate_sigma_sq(&data, &fit).unwrap().sqrt();
    let seed = SeedSpec::new(77, 3);
    let refits = bootstrap_refits(&data, &fit, sigma, 40, seed, &cfg).unwrap();
    for j in [0, 7] {
        let art = nodewise_direction(&data, j, 0.25, &cfg).unwrap();
        let a = bootstrap_debiased(&data, &fit, sigma, &art, 40, seed, &cfg).unwrap();
        let b = bootstrap_debiased(&data, &fit, sigma, &art, 40, seed, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(refits.distribution(&fit, &art).unwrap(), a);
    }
}

#[test]
fn single_draw_determinism() {
    let (data, _, _) = random_instance(14, 30, 10, 2, 1.0, 1.0);
    let cfg = SolverConfig::default();
    let fit = fit_lasso(&data, 0.2, &cfg).unwrap();
    let art = nodewise_direction(&data, 1, 0.2, &cfg).unwrap();
    let a = bootstrap_debiased(&data, &fit, 1.0, &art, 1, SeedSpec::new(5, 5), &cfg).unwrap();
    let b = bootstrap_debiased(&data, &fit, 1.0, &art, 1, SeedSpec::new(5, 5), &cfg).unwrap();
    assert_eq!(a.draws, b.draws);
}

#[test]
fn plugin_half_width_example() {
    // ‖z‖₂ = 10 and z·x = 100 give se factor 0.1.
    let art: DebiasArtifacts<f64> = DebiasArtifacts {
        j: 0,
        z: vec![10.0],
        gamma_hat: vec![],
        lambda_j: 0.1,
        denom: 100.0,
        z_norm2: 100.0,
        nodewise_kkt_gap: 0.0,
        z_fourth_ratio: 1.0,
        z_energy: 100.0,
    };
    let est = hdinfer::DebiasedEstimate { j: 0, beta_db: 1.0, beta_lasso: 1.0, correction: 0.0 };
    let ci = plugin_ci(&est, &art, 1.0, 0.05).unwrap();
    assert!((ci.upper - 1.0 - 0.19599639845400542).abs() < 1e-9);
    assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
}

fn setup(seed: u64) -> (RegressionData<f64>, hdinfer::LassoFit<f64>, DebiasArtifacts<f64>, f64) {
    let (data, _, _) = random_instance(seed, 40, 20, 3, 2.0, 1.0);
    let cfg = SolverConfig::default();
    let fit = fit_lasso(&data, 0.25, &cfg).unwrap();
    let art = nodewise_direction(&data, seed as usize % 20, 0.25, &cfg).unwrap();
    let sigma = estimate_sigma_sq(&data, &fit).unwrap().sqrt();
    (data, fit, art, sigma)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nodewise_kkt_and_residual_identity(seed in 0u64..5_000, lambda_j in 0.02f64..0.6) {
        let (data, _, _) = random_instance(seed, 30, 15, 3, 1.0, 1.0);
        let j = seed as usize % 15;
        let art = nodewise_direction(&data, j, lambda_j, &SolverConfig::default()).unwrap();
        let x = data.x();
        let g = art.gamma_full();
        for i in 0..30 {
            let fitted: f64 = (0..15).filter(|&k| k != j).map(|k| x[(i, k)] * g[k]).sum();
            prop_assert!((art.z[i] + fitted - x[(i, j)]).abs() <= 1e-10);
        }
        for k in (0..15).filter(|&k| k != j) {
            prop_assert!((dotp(&art.z, &col(x, k)) / 30.0).abs() <= lambda_j + 1e-8);
        }
        let xj = col(x, j);
        prop_assert!(kkt_gap(x, &xj, &g, lambda_j, Some(j)) <= 1e-8);
        prop_assert!((art.denom - dotp(&art.z, &xj)).abs() < 1e-9);
    }

    #[test]
    fn percentile_intervals_nest(seed in 0u64..5_000, lo in 0.5f64..0.9, gap in 0.01f64..0.09) {
        let (data, fit, art, sigma) = setup(seed);
        let dist = bootstrap_debiased(&data, &fit, sigma, &art, 60, SeedSpec::new(seed, 1), &SolverConfig::default()).unwrap();
        let est = debias(&data, &fit, &art).unwrap();
        let a = percentile_ci(est.beta_db, &dist, lo).unwrap();
        let b = percentile_ci(est.beta_db, &dist, lo + gap).unwrap();
        prop_assert!(b.lower <= a.lower && a.upper <= b.upper);
        prop_assert!(a.lower <= a.upper);
    }

    #[test]
    fn ddb_plus_median_is_db(seed in 0u64..5_000) {
        let (data, fit, art, sigma) = setup(seed);
        let dist = bootstrap_debiased(&data, &fit, sigma, &art, 31, SeedSpec::new(seed, 2), &SolverConfig::default()).unwrap();
        let est = debias(&data, &fit, &art).unwrap();
        let ddb = ddb_estimate(est.beta_db, &dist).unwrap();
        let med = lower_median(&dist.draws).unwrap();
        prop_assert!((ddb + med - est.beta_db).abs() <= 4.0 * f64::EPSILON * est.beta_db.abs().max(1.0));
    }

    #[test]
    fn pivots_ignore_direction_scale(seed in 0u64..5_000, c in 0.01f64..100.0, truth in -3.0f64..3.0) {
        let (data, fit, art, sigma) = setup(seed);
        let est = debias(&data, &fit, &art).unwrap();
        let scaled = DebiasArtifacts {
            z: art.z.iter().map(|v| v * c).collect(),
            denom: art.denom * c,
            z_norm2: art.z_norm2 * c * c,
            ..art.clone()
        };
        let est2 = debias(&data, &fit, &scaled).unwrap();
        let a = pivots(&est, est.beta_db - 0.1, &art, sigma, truth).unwrap();
        let b = pivots(&est2, est.beta_db - 0.1, &scaled, sigma, truth).unwrap();
        prop_assert!((a.r_j - b.r_j).abs() <= 1e-8 * a.r_j.abs().max(1.0));
        prop_assert!((a.r_j_ddb - b.r_j_ddb).abs() <= 1e-8 * a.r_j_ddb.abs().max(1.0));
    }

    #[test]
    fn sigma_estimate_ignores_row_order(seed in 0u64..5_000, shift in 1usize..39) {
        let (data, fit, _, _) = setup(seed);
        let rows: Vec<usize> = (0..40).map(|i| (i + shift) % 40).collect();
        let x = Matrix::from_fn(40, 20, |i, j| data.x()[(rows[i], j)]);
        let y = rows.iter().map(|&i| data.y()[i]).collect();
        let permuted = RegressionData::new(x, y).unwrap();
        let a = estimate_sigma_sq(&data, &fit).unwrap();
        let b = estimate_sigma_sq(&permuted, &fit).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn quantile_rank_is_clamped(alpha in 0.0f64..=1.0, m in 1usize..2_000) {
        let r = quantile_rank(alpha, m);
        prop_assert!((1..=m).contains(&r));
    }

    #[test]
    fn plugin_width_grows_with_level(seed in 0u64..5_000, a1 in 0.01f64..0.5, a2 in 0.01f64..0.5) {
        prop_assume!((a1 - a2).abs() > 1e-6);
        let (data, fit, art, sigma) = setup(seed);
        let est = debias(&data, &fit, &art).unwrap();
        let w = |a: f64| plugin_ci(&est, &art, sigma, a).unwrap().length();
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(w(lo) > w(hi));
        let w2 = plugin_ci(&est, &art, 2.0 * sigma, lo).unwrap().length();
        prop_assert!((w2 - 2.0 * w(lo)).abs() <= 1e-12 * w2);
    }
}
