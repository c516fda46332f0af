use proptest::prelude::*;

use super::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// `log C(n, k)` by summing logs of the product formula.
fn ln_choose_oracle(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

#[test]
fn ln_choose_matches_product_formula() {
    for (n, k) in [(4, 2), (10, 3), (60, 30), (1000, 17), (5, 5), (7, 0)] {
        assert!(close(ln_choose(n, k), ln_choose_oracle(n, k), 1e-10), "{n} {k}");
    }
    assert!((ln_support_count(4, 2) - 24f64.ln()).abs() < 1e-12);
}

#[test]
fn expected_k1_examples() {
    let (tight, relaxed) = expected_k1_bound(1.0, 4, 2).unwrap();
    assert!((tight - (2.0 * 24f64.ln()).sqrt()).abs() < 1e-12);
    assert!((tight - 2.52113).abs() < 1e-5);
    assert!((relaxed - 3.08953).abs() < 1e-5);
    assert!(matches!(expected_k1_bound(1.0, 4, 0), Err(Error::BadK { .. })));
    assert_eq!(expected_k1_bound(0.0, 4, 2).unwrap(), (0.0, 0.0));
}

#[test]
fn expected_l1_examples() {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    assert!((expected_l1(&[1.0, 1.0]) - 1.59577).abs() < 1e-5);
    assert_eq!(expected_l1(&[0.0, 0.0, 0.0]), 0.0);
    assert!((expected_l1(&[1.0; 7]) - 7.0 * c).abs() < 1e-12);
}

#[test]
fn tail_examples() {
    assert_eq!(tail_bounds(0.0, 2.0).unwrap(), (1.0, 1.0));
    let (e, g) = tail_bounds(1.5, 1.5).unwrap();
    assert!((e - 0.606531).abs() < 1e-6);
    assert!((g - 0.317311).abs() < 1e-6);
    let (e, g) = tail_bounds(60.0, 1.0).unwrap();
    assert!(e < 1e-300 && g < 1e-300);
    assert!(tail_bounds(-1.0, 1.0).is_err());
    assert!(tail_bounds(1.0, 0.0).is_err());
}

#[test]
fn majorization_examples() {
    let b = majorization_bound(1.0, 24f64.ln()).unwrap();
    assert!((b - 3.15977).abs() < 1e-5);
    assert_eq!(majorization_bound(2.0, 0.0).unwrap(), 0.0);
    let ln_v = ln_support_count(30, 4);
    let ratio = majorization_bound(1.0, ln_v).unwrap() / (2.0 * ln_v).sqrt();
    assert!((ratio - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
}

#[test]
fn hoeffding_examples() {
    assert_eq!(hoeffding_samples(10.0, 0.1, 0.05).unwrap(), 18445);
    assert_eq!(hoeffding_samples(10.0, 0.1, 2.0).unwrap(), 1);
    assert_eq!(hoeffding_samples(10.0, f64::INFINITY, 0.05).unwrap(), 1);
    assert!(hoeffding_samples(0.0, 0.1, 0.05).is_err());
}

#[test]
fn amplification_examples() {
    assert_eq!(error_amplification(0.25).unwrap(), 4.0);
    assert_eq!(error_amplification(0.0).unwrap(), 2.0);
    assert!((error_amplification(0.49).unwrap() - 100.0).abs() < 1e-9);
    assert!(matches!(error_amplification(0.5), Err(Error::BadAlpha(_))));
}

#[test]
fn rip_examples() {
    let r = rip_implied(0.2, 0.2, 5, 100).unwrap();
    assert!((r.sigma_upper - 6f64.sqrt()).abs() < 1e-12);
    assert!((r.row_norm_lower - 0.8f64.sqrt()).abs() < 1e-12);
    assert!((r.l_upper - 20.0 * 6f64.sqrt()).abs() < 1e-12);
    assert!(rip_implied(0.0, 0.2, 5, 100).is_err());
}

/// Row-norm sum giving `sqrt(2/pi) sum = target`.
fn row_sum_for(target: f64) -> f64 {
    target / (2.0 / std::f64::consts::PI).sqrt()
}

#[test]
fn gaussian_certificate_examples() {
    let p = RecoveryParams::gaussian(4, 2, 0.5, 0.0);
    let c = certify_gaussian(1.0, 1.0, row_sum_for(10.0), &p).unwrap();
    let width = (4.0 * (1.0 + 4f64.ln())).sqrt();
    assert!((c.beta_star - (5.0 - width) / 1.5).abs() < 1e-12);
    assert!((c.beta_star - 1.273649).abs() < 1e-6);
    assert!((c.best_probability - 0.111253).abs() < 1e-6);
    assert!(c.certified);
    assert_eq!(c.probability, 0.0);

    let p3 = RecoveryParams::gaussian(4, 2, 0.5, 3.0);
    assert!((p3.probability(3.0) - 0.977782).abs() < 1e-6);

    let huge = certify_gaussian(1e6, 1.0, row_sum_for(10.0), &p).unwrap();
    assert!(huge.beta_star < 0.0);
    assert!(!huge.certified);
    assert_eq!(huge.probability, 0.0);
    assert_eq!(huge.best_probability, 0.0);
}

#[test]
fn gaussian_certificate_at_beta_star_is_tight() {
    let p = RecoveryParams::gaussian(40, 3, 0.45, 0.0);
    let c = certify_gaussian(0.7, 3.0, 30.0, &p).unwrap();
    assert!(c.beta_star > 0.0);
    let at = certify_gaussian(0.7, 3.0, 30.0, &RecoveryParams { beta: c.beta_star, ..p }).unwrap();
    assert!((at.lhs - at.rhs).abs() <= 1e-9 * at.lhs.abs());
    let past = RecoveryParams { beta: c.beta_star * 1.001, ..p };
    assert!(!certify_gaussian(0.7, 3.0, 30.0, &past).unwrap().certified);
}

#[test]
fn bounded_certificate_examples() {
    let p = RecoveryParams::bounded(4, 2, 0.5, 3.0, 1.0, 1.0);
    assert!((p.probability(3.0) - 0.999753).abs() < 1e-6);

    let c = certify_bounded(6.0, 10.0, 0.5, 0.5, &p).unwrap();
    assert!(c.beta_star < 0.0 && !c.certified);

    // Same inputs as the Gaussian example, expectations passed directly.
    let width = (4.0 * (1.0 + 4f64.ln())).sqrt();
    let pb = RecoveryParams::bounded(4, 2, 0.5, 0.0, 1.0, 1.0);
    let b = certify_bounded(width, 10.0, 1.0, 1.0, &pb).unwrap();
    let g = certify_gaussian(1.0, 1.0, row_sum_for(10.0), &RecoveryParams::gaussian(4, 2, 0.5, 0.0))
        .unwrap();
    assert!((b.beta_star - g.beta_star).abs() < 1e-12);
    let bs = b.beta_star;
    assert!((b.best_probability - (1.0 - 2.0 * (-bs * bs).exp())).abs() < 1e-12);

    assert!(certify_bounded(1.0, 1.0, 1.0, 1.0, &RecoveryParams::gaussian(4, 2, 0.5, 0.0)).is_err());
}

#[test]
fn log_forms() {
    let (n, k) = (50, 5);
    let s = LogForm::Standard.factor(n, k);
    let sh = LogForm::Shifted.factor(n, k);
    let pl = LogForm::Plain.factor(n, k);
    assert!((s - (10.0 * (1.0 + 20f64.ln())).sqrt()).abs() < 1e-12);
    assert!((sh - (10.0 * 21f64.ln()).sqrt()).abs() < 1e-12);
    assert!((pl - (10.0 * 20f64.ln()).sqrt()).abs() < 1e-12);
    assert!(pl < sh && sh < s);
    for f in [LogForm::Standard, LogForm::Shifted, LogForm::Plain] {
        assert_eq!(LogForm::parse(f.name()), Some(f));
    }
}

#[test]
fn tightness_examples() {
    assert!(tightness_condition(0.0, 10.0, 1.0, 0.49, 1.0, 50, 5).unwrap());
    assert!(!tightness_condition(1.0, 10.0, 1.0, 0.49, 1e6, 50, 5).unwrap());
}

#[test]
fn tightness_matches_plain_certificate() {
    for (sdpk, rows, l) in [(0.3, 40.0, 4.0), (2.0, 40.0, 4.0), (0.9, 25.0, 3.0)] {
        let p = RecoveryParams::gaussian(60, 3, 0.49, 1.0).with_log_form(LogForm::Plain);
        let c = certify_gaussian(f64::sqrt(sdpk), l, rows, &p).unwrap();
        assert_eq!(tightness_condition(sdpk, rows, l, 0.49, 1.0, 60, 3).unwrap(), c.certified);
    }
}

proptest! {
    #[test]
    fn tight_never_exceeds_relaxed(n in 1usize..10_000, frac in 0.0f64..1.0) {
        let k = 1 + ((n - 1) as f64 * frac) as usize;
        let (t, r) = expected_k1_bound(1.0, n, k).unwrap();
        prop_assert!(t <= r * (1.0 + 1e-12));
    }

    #[test]
    fn normal_tail_below_exponential(x in 0.001f64..40.0) {
        let (e, g) = tail_bounds(x, 1.0).unwrap();
        prop_assert!(g <= e);
    }

    #[test]
    fn beta_star_monotone(
        sigma in 0.05f64..5.0,
        l in 0.05f64..5.0,
        rows in 1.0f64..100.0,
        alpha in 0.05f64..0.95,
        bump in 1.01f64..2.0,
    ) {
        let p = RecoveryParams::gaussian(100, 4, alpha, 0.0);
        let base = certify_gaussian(sigma, l, rows, &p).unwrap().beta_star;
        if base >= 0.0 {
            prop_assert!(certify_gaussian(sigma * bump, l, rows, &p).unwrap().beta_star <= base);
            prop_assert!(certify_gaussian(sigma, l * bump, rows, &p).unwrap().beta_star <= base);
        }
        prop_assert!(certify_gaussian(sigma, l, rows * bump, &p).unwrap().beta_star >= base);
        let pa = RecoveryParams { alpha: (alpha * bump).min(0.99), ..p };
        prop_assert!(certify_gaussian(sigma, l, rows, &pa).unwrap().beta_star >= base);
    }
}
