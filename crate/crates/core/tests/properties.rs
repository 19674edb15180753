use amh_logit::amh::{amh_cdf, amh_cdf_series, latent_correlation, logistic_cdf, series_terms};
use amh_logit::association::{
    amh_correlation_extremum, binary_correlation_amh, binary_correlation_type2, odds_ratio, odds_ratio_range,
};
use amh_logit::observed::{cell_probabilities, observed_moments, pmf};
use amh_logit::{AmhParams, Thresholds};
use proptest::prelude::*;

fn thresholds(k: usize) -> impl Strategy<Value = Thresholds> {
    (-4.0..4.0f64, prop::collection::vec(-4.0..4.0f64, k - 1), prop::collection::vec(0.05..1.5f64, k - 1)).prop_map(
        |(theta, start, gaps)| {
            let mut tau = vec![start[0]];
            for g in &gaps[1..] {
                tau.push(tau.last().unwrap() + g);
            }
            Thresholds::new(theta, tau).unwrap()
        },
    )
}

fn any_k() -> impl Strategy<Value = Thresholds> {
    (2usize..7).prop_flat_map(thresholds)
}

fn std_params(w: f64) -> AmhParams {
    AmhParams::standard(w).unwrap()
}

/// Odds ratio from the collapsed 2x2 table of cell probabilities.
fn table_or(th: &Thresholds, w: f64, k: usize) -> f64 {
    let c = cell_probabilities(th, &std_params(w)).collapse_at(k);
    c[0][0] * c[1][1] / (c[0][1] * c[1][0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn pmf_sums_to_one(th in any_k(), w in -1.0..=1.0f64) {
        let p = std_params(w);
        let mut total = 0.0;
        for x in 0..2 {
            for y in 1..=th.k() {
                let v = pmf(&th, &p, x, y).unwrap();
                prop_assert!(v >= 0.0);
                total += v;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_left_block_is_the_cdf(th in any_k(), w in -1.0..=1.0f64) {
        let p = std_params(w);
        let mut acc = 0.0;
        for k in 1..th.k() {
            acc += pmf(&th, &p, 0, k).unwrap();
            prop_assert!((acc - amh_cdf(&p, th.theta(), th.tau()[k - 1])).abs() < 1e-14);
        }
    }

    #[test]
    fn series_matches_closed_form(u in -6.0..6.0f64, v in -6.0..6.0f64, w in -0.99..=0.99f64) {
        let p = std_params(w);
        let s = amh_cdf_series(&p, u, v, series_terms(w, 1e-14)).unwrap();
        prop_assert!((s - amh_cdf(&p, u, v)).abs() < 1e-10);
    }

    #[test]
    fn odds_ratio_forms_agree(th in any_k(), w in -1.0..=1.0f64, pick in 0usize..10) {
        let k = 1 + pick % (th.k() - 1);
        let closed = odds_ratio(&th, &std_params(w), k, 0.0, 0.0).unwrap();
        let table = table_or(&th, w, k);
        prop_assert!((closed - table).abs() <= 1e-9 * table, "{} vs {}", closed, table);
    }

    #[test]
    fn odds_ratio_within_range_and_signed_like_omega(th in any_k(), w in -1.0..=1.0f64) {
        for k in 1..th.k() {
            let psi = odds_ratio(&th, &std_params(w), k, 0.0, 0.0).unwrap();
            let (lo, hi) = odds_ratio_range(&th, k, 0.0, 0.0).unwrap();
            prop_assert!(lo * (1.0 - 1e-12) <= psi && psi <= hi * (1.0 + 1e-12));
            if w.abs() > 1e-9 {
                prop_assert_eq!(psi > 1.0, w > 0.0);
            }
        }
    }

    #[test]
    fn covariate_effects_shift_odds_ratio_arguments(th in thresholds(3), w in -1.0..=1.0f64, e1 in -2.0..2.0f64, e2 in -2.0..2.0f64) {
        let p = std_params(w);
        let shifted = Thresholds::new(th.theta() - e1, th.tau().iter().map(|t| t - e2).collect()).unwrap();
        for k in 1..3 {
            let a = odds_ratio(&th, &p, k, e1, e2).unwrap();
            let b = odds_ratio(&shifted, &p, k, 0.0, 0.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn binary_correlation_matches_pmf(th in thresholds(2), w in -1.0..=1.0f64) {
        let m = observed_moments(&th, &std_params(w));
        let r = binary_correlation_amh(th.theta(), th.tau()[0], w);
        prop_assert!((m.correlation() - r).abs() < 1e-12);
    }

    #[test]
    fn amh_correlation_exceeds_type_two(theta in -4.0..4.0f64, tau in -4.0..4.0f64, w in -1.0..=1.0f64) {
        prop_assume!(w.abs() > 1e-6);
        prop_assert!(binary_correlation_amh(theta, tau, w) > binary_correlation_type2(theta, tau, w));
    }

    #[test]
    fn correlation_bounded_by_extremum(theta in -5.0..5.0f64, tau in -5.0..5.0f64, w in 0.01..0.999f64) {
        let (_, best) = amh_correlation_extremum(w);
        prop_assert!(binary_correlation_amh(theta, tau, w) <= best + 1e-12);
    }

    #[test]
    fn extreme_cell_increases_with_positive_omega(th in any_k(), w in 0.0..0.98f64) {
        let k = th.k();
        let a = pmf(&th, &std_params(w), 1, k).unwrap();
        let b = pmf(&th, &std_params(w + 0.02), 1, k).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn cumulative_log_odds_differences_ignore_location(th in thresholds(4), w in -1.0..=1.0f64, nu in -3.0..3.0f64) {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let cum = |p: &AmhParams| -> Vec<f64> {
            let cells = cell_probabilities(&th, p);
            let cols = cells.column_sums();
            (1..4).map(|k| logit(cols[..k].iter().sum())).collect()
        };
        let base = cum(&std_params(w));
        let moved = cum(&AmhParams::new(w, 0.0, nu).unwrap());
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            prop_assert!(((base[i] - base[j]) - (moved[i] - moved[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn variance_display_matches_pmf(th in any_k(), w in -1.0..=1.0f64) {
        let p = std_params(w);
        let cells = cell_probabilities(&th, &p);
        let py = cells.column_sums();
        let pk = |k: usize| py[k - 1];
        let kk = th.k();
        let mut display = pk(1) * (1.0 - pk(1));
        for k in 2..=kk {
            let kf = k as f64;
            for j in 1..k {
                display += kf * (kf * pk(k) * (1.0 - pk(k)) - 2.0 * j as f64 * (kf - 1.0) * pk(j) * pk(k)) / (kf - 1.0);
            }
        }
        prop_assert!((display - observed_moments(&th, &p).var_y).abs() < 1e-10);
    }

    #[test]
    fn binary_covariance_display(th in thresholds(2), w in -1.0..=1.0f64) {
        let (a, b) = (th.theta(), th.tau()[0]);
        let d = 1.0 + (-a).exp() + (-b).exp() + (1.0 - w) * (-a - b).exp();
        let display = w * (-a - b).exp() / (d * (1.0 + (-a).exp()) * (1.0 + (-b).exp()));
        let m = observed_moments(&th, &std_params(w));
        prop_assert!((m.cov_xy - display).abs() < 1e-14);
        prop_assert!((m.mean_x - logistic_cdf(-a)).abs() < 1e-15);
    }
}

#[test]
fn extremum_location_and_value() {
    for w in [0.1, 0.5, 0.9, 0.999] {
        let (at, best) = amh_correlation_extremum(w);
        assert!((at - 0.5 * (1.0 - w).ln()).abs() < 1e-15);
        assert!((best - w / (2.0 * (1.0 + (1.0 - w).sqrt()))).abs() < 1e-15);
        assert!((binary_correlation_amh(at, at, w) - best).abs() < 1e-14);
        for d in [-1e-3, 1e-3] {
            assert!(binary_correlation_amh(at + d, at, w) < best);
            assert!(binary_correlation_amh(at, at + d, w) < best);
        }
    }
}

#[test]
fn latent_correlation_limits() {
    assert!((latent_correlation(1.0, 0) - 0.5).abs() < 1e-15);
    assert!((latent_correlation(-1.0, 0) + 0.25).abs() < 1e-15);
    assert_eq!(latent_correlation(0.0, 10), 0.0);
}
