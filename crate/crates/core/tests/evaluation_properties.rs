use geom_deeponet::evaluation::{aggregate, case_metrics, fit_power_law, ols, similarity_regression, CaseMetrics, Grouping};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cases(rows: &[(Vec<f64>, Vec<f64>)]) -> Vec<CaseMetrics> {
    rows.iter()
        .enumerate()
        .map(|(k, (p, t))| case_metrics(&format!("case_{k:03}"), p, t, 1).unwrap())
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aggregation_ignores_case_order(
        rows in vec((vec(-10.0f64..10.0, 5), vec(1.0f64..10.0, 5)), 1..20),
        seed in any::<u64>(),
    ) {
        let a = cases(&rows);
        let mut b = a.clone();
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (ra, rb) = (aggregate(a, Grouping::FullMesh).unwrap(), aggregate(b, Grouping::FullMesh).unwrap());
        prop_assert!(close(ra.mean_mae[0], rb.mean_mae[0]));
        prop_assert!(close(ra.pooled_relative_l2[0].unwrap(), rb.pooled_relative_l2[0].unwrap()));
        let ids = |r: &geom_deeponet::evaluation::EvalReport| r.percentiles.iter().map(|p| p.mae).collect::<Vec<_>>();
        prop_assert_eq!(ids(&ra), ids(&rb));
    }

    #[test]
    fn mae_ignores_joint_row_order(pairs in vec((-100.0f64..100.0, -100.0f64..100.0), 1..50), seed in any::<u64>()) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (ps, ts): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
        let (a, b) = (case_metrics("a", &p, &t, 1).unwrap(), case_metrics("a", &ps, &ts, 1).unwrap());
        prop_assert!(close(a.mae[0], b.mae[0]));
        prop_assert!(a.mae[0] >= 0.0);
    }

    #[test]
    fn ols_recovers_lines(xs in vec(-5.0f64..5.0, 3..40), slope in -10.0f64..10.0, intercept in -10.0f64..10.0) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let fit = ols(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-9);
        prop_assert!((fit.intercept - intercept).abs() <= 1e-9);
        let flat = similarity_regression(&vec![3.5; xs.len()], &xs).unwrap();
        prop_assert!(flat.slope.abs() <= 1e-12);
    }

    #[test]
    fn power_law_recovers_exponent(a in 1e-9f64..1e-3, k in 0.3f64..2.0, unit in 1e-6f64..1e6) {
        let sizes = [100usize, 1000, 10_000, 50_000];
        let secs: Vec<f64> = sizes.iter().map(|&n| a * (n as f64).powf(k)).collect();
        let fit = fit_power_law(&sizes, &secs).unwrap();
        prop_assert!((fit.exponent - k).abs() <= 1e-6);
        let rescaled: Vec<f64> = secs.iter().map(|s| s * unit).collect();
        prop_assert!((fit_power_law(&sizes, &rescaled).unwrap().exponent - fit.exponent).abs() <= 1e-9);
    }
}
