mod common;

use common::*;
use nowcast::baselines::{fit_lasso, fit_ridge, lambda_max, lasso_kkt_violation, soft_threshold};
use nowcast::data::{kfold_partition, train_test_split, DesignMatrix};
use nowcast::explain::{impurity_importance, pdp_1d, GridSpec};
use nowcast::forecast::resampled_forecast;
use nowcast::rf::{best_split, fit_forest, ForestParams};
use nowcast::stats;
use proptest::prelude::*;
use rand::Rng;

fn small_params(seed: u64) -> ForestParams {
    ForestParams {
        n_trees: 8,
        max_depth: 4,
        seed,
        ..ForestParams::default()
    }
}

fn random_design(seed: u64, n: usize, d: usize) -> DesignMatrix<f64> {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|x| x.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.0)).sum::<f64>() + r.random_range(-1.0..1.0))
        .collect();
    DesignMatrix::from_rows(y, rows, names(d), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_matches_enumeration(seed in any::<u64>(), n in 2usize..30, d in 1usize..=3, coarse in any::<bool>(), min_leaf in 1usize..4) {
        let (y, x) = random_node(&mut rng(seed), n, d, coarse);
        let fast = best_split(&y, &x, &(0..d).collect::<Vec<_>>(), min_leaf);
        let slow = brute_force_split(&y, &x, min_leaf);
        match (fast, slow) {
            (None, None) => {}
            (Some(s), Some((f, t, cost))) => {
                prop_assert_eq!(s.feature, f);
                prop_assert!((s.threshold - t).abs() <= 1e-12);
                prop_assert!((s.total_mae_after - cost).abs() <= 1e-12);
                prop_assert_eq!(s.left.len() + s.right.len(), n);
                prop_assert!(s.left.iter().all(|&i| x[i][f] <= s.threshold));
                prop_assert!(s.right.iter().all(|&i| x[i][f] > s.threshold));
            }
            (a, b) => prop_assert!(false, "fast {:?} vs brute {:?}", a.map(|s| (s.feature, s.threshold)), b),
        }
    }

    #[test]
    fn forest_fit_is_deterministic(seed in any::<u64>(), n in 10usize..60) {
        let design = random_design(seed, n, 3);
        let p = small_params(seed);
        let a = fit_forest(&design, &p).unwrap();
        let b = fit_forest(&design, &p).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn unbagged_tree_ignores_row_order(seed in any::<u64>(), n in 4usize..40) {
        let design = random_design(seed, n, 3);
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(seed as usize % n);
        let shuffled = design.subset(&order);
        let p = ForestParams { n_trees: 1, bootstrap: false, feature_fraction: 1.0, max_depth: 6, ..small_params(seed) };
        let a = fit_forest(&design, &p).unwrap();
        let b = fit_forest(&shuffled, &p).unwrap();
        prop_assert_eq!(&a.trees, &b.trees);
    }

    #[test]
    fn unbagged_training_error_never_exceeds_median_predictor(seed in any::<u64>(), n in 5usize..60, depth in 0usize..5) {
        let design = random_design(seed, n, 2);
        let p = ForestParams { max_depth: depth, bootstrap: false, feature_fraction: 1.0, ..small_params(seed) };
        let forest = fit_forest(&design, &p).unwrap();
        let fitted = forest.predict_design(&design).unwrap();
        let m = stats::median(design.target()).unwrap();
        let base = stats::mae(&vec![m; n], design.target()).unwrap();
        prop_assert!(stats::mae(&fitted, design.target()).unwrap() <= base + 1e-12);
    }

    #[test]
    fn lasso_satisfies_kkt(seed in any::<u64>(), n in 8usize..50, d in 1usize..6, frac in 0.01f64..1.2) {
        let design = random_design(seed, n, d);
        let lam = lambda_max(&design).unwrap() * frac;
        let m = fit_lasso(&design, lam, 1e-10, 100_000).unwrap();
        prop_assert!(m.converged);
        prop_assert!(lasso_kkt_violation(&m, &design).unwrap() <= 1e-6);
        if frac >= 1.0 {
            prop_assert!(m.standardized.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn ridge_norm_shrinks_with_penalty(seed in any::<u64>(), n in 6usize..40, d in 1usize..5) {
        let design = random_design(seed, n, d);
        let norms: Vec<f64> = (0..10)
            .map(|k| fit_ridge(&design, 1e-3 * 4f64.powi(k)).unwrap().coefficient_norm())
            .collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-14);
        }
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero(z in -100.0f64..100.0, g in 0.0f64..50.0) {
        let s = soft_threshold(z, g);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert!((z.abs() <= g) == (s == 0.0));
    }

    #[test]
    fn importance_shares_sum_to_one(seed in any::<u64>(), n in 10usize..60) {
        let design = random_design(seed, n, 3);
        let forest = fit_forest(&design, &small_params(seed)).unwrap();
        let rep = impurity_importance(&forest, &design).unwrap();
        let total: f64 = rep.shares.iter().sum();
        prop_assert!(rep.shares.iter().all(|&s| s >= 0.0));
        prop_assert!((total - 1.0).abs() < 1e-9 || total == 0.0);
    }

    #[test]
    fn pdp_point_is_mean_of_overwritten_predictions(seed in any::<u64>(), n in 5usize..40, v in -4.0f64..4.0) {
        let design = random_design(seed, n, 2);
        let forest = fit_forest(&design, &small_params(seed)).unwrap();
        let pdp = pdp_1d(&forest, &design, "x0", &GridSpec::Values(vec![v])).unwrap();
        let direct: f64 = (0..n)
            .map(|i| {
                let mut row = design.row(i).to_vec();
                row[0] = v;
                forest.predict(&row).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        prop_assert!((pdp.response[0] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        let q = pdp_1d(&forest, &design, "x1", &GridSpec::Quantiles(7)).unwrap();
        prop_assert!(q.grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(q.response.iter().all(|r| r.is_finite()));
    }

    #[test]
    fn forecast_summary_matches_records(seed in any::<u64>(), iterations in 1usize..8) {
        let design = random_design(seed, 40, 2);
        let query = design.row(0).to_vec();
        let res = resampled_forecast(&design, &query, &small_params(seed), iterations, seed).unwrap();
        let preds: Vec<f64> = res.records.iter().map(|r| r.prediction).collect();
        let mean = preds.iter().sum::<f64>() / preds.len() as f64;
        prop_assert_eq!(res.records.len(), iterations);
        prop_assert!((res.point - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        prop_assert!((res.std - stats::sample_std(&preds)).abs() <= 1e-12);
    }

    #[test]
    fn partitions_cover_rows(n in 2usize..200, k in 2usize..12, frac in 0.05f64..0.95, seed in any::<u64>()) {
        if let Ok((train, test)) = train_test_split(n, frac, seed) {
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        if k <= n {
            let folds = kfold_partition(n, k, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
