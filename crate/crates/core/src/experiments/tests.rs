use super::*;

#[test]
fn slope_of_power_law() {
    let x = [1.0, 2.0, 4.0, 8.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
    assert!((loglog_slope(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
}

#[test]
fn nested_signals() {
    let s = NestedSignal::draw(20, 3, 0);
    let e5 = s.signal(5);
    let e6 = s.signal(6);
    assert_eq!(e5.iter().filter(|v| **v != 0.0).count(), 5);
    for (a, b) in e5.iter().zip(&e6) {
        assert!(*a == 0.0 || a == b);
    }
    assert!(e6.iter().all(|v| v.abs() <= 1.0));
    let d = random_direction(30, 1, DIRECTION_STREAM);
    assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn small_residual_run() {
    let cfg = ResidualConfig {
        n: 40,
        q: 15,
        nonzeros: 6,
        trials: 60,
        seed: 2,
        bins: 10,
        ..ResidualConfig::default()
    };
    let r = fig1_residuals(&cfg).unwrap();
    assert_eq!(r.rows.len(), 60);
    assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), 60);
    assert_eq!(trials_csv(&r.rows).lines().count(), 61);
    assert!(r.mean.abs() <= 4.0 * r.stderr);
    let (_, violations) = r.error_bound_violations(0.49).unwrap();
    assert_eq!(violations, 0);
    let again = fig1_residuals(&cfg).unwrap();
    assert_eq!(trials_csv(&r.rows), trials_csv(&again.rows));
}

#[test]
fn small_scaling_run() {
    let cfg = ScalingConfig {
        n_grid: vec![20, 40, 80],
        trials: 2,
        maxcut: false,
        ..ScalingConfig::default()
    };
    let r = scaling(&cfg).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.slope_row_norms > 0.9 && r.slope_row_norms < 1.1, "{}", r.slope_row_norms);
    for row in &r.rows {
        assert!(row.l_lower <= row.l_upper && row.sigma_lower <= row.sigma_upper);
    }
    assert_eq!(r.to_csv().lines().count(), 4);
}

#[test]
fn small_curve_run() {
    let cfg = CurveConfig {
        n: 30,
        m: 15,
        k_max: 6,
        trials: 20,
        seed: 1,
        samples: 50,
        ..CurveConfig::default()
    };
    let r = recovery_curve(&cfg).unwrap();
    assert_eq!(r.rows.len(), 6);
    for row in &r.rows {
        assert!((0.0..=1.0).contains(&row.empirical));
        assert!((0.0..=1.0).contains(&row.predicted));
        assert!(row.sigma_upper <= r.l_upper * (1.0 + 1e-12));
    }
    assert_eq!(r.rows[0].empirical, 1.0);
}

#[test]
fn certify_two_column_coding_matrix() {
    // A = [1 1]: F = (1, -1)^T / sqrt 2, G_ii = 1/2, sigma_1^2 = 1/2, L^2 = 2.
    let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let cfg = CertifyConfig::new(MatrixKind::Coding, 1);
    let r = certify_matrix(a, &cfg).unwrap();
    assert_eq!((r.n, r.m), (2, 1));
    assert!((r.sum_row_norms - 2f64.sqrt()).abs() < 1e-12);
    assert!((r.sigma_hat - 0.5f64.sqrt()).abs() < 1e-9, "{}", r.sigma_hat);
    assert!((r.l_hat - 2f64.sqrt()).abs() < 1e-9, "{}", r.l_hat);
    let width = (2.0 * (1.0 + 4f64.ln())).sqrt();
    let e_l1 = (2.0 / std::f64::consts::PI).sqrt() * 2f64.sqrt();
    let beta_star = (0.49 * e_l1 - width * 0.5f64.sqrt()) / (0.5f64.sqrt() + 0.49 * 2f64.sqrt());
    assert!((r.certificate.beta_star - beta_star).abs() < 1e-8);
    assert!(!r.certificate.certified);
}

#[test]
fn certify_identity_nullspace() {
    let cfg = CertifyConfig::new(MatrixKind::Nullspace, 4);
    let r = certify_matrix(DMatrix::identity(4, 4), &cfg).unwrap();
    assert!((r.sigma_hat - 2.0).abs() < 1e-6, "{}", r.sigma_hat);
    assert!((r.l_hat - 2.0).abs() < 1e-9);
    assert!((r.sum_row_norms - 4.0).abs() < 1e-12);
    let width = (8.0 * (1.0 + 2f64.ln())).sqrt();
    assert!((r.certificate.lhs - width * r.sigma_hat).abs() < 1e-9);
}

#[test]
fn certify_bounded_model() {
    let mut cfg = CertifyConfig::new(MatrixKind::Nullspace, 1);
    cfg.model = SampleModel::Uniform { delta: 1.0 };
    cfg.mc_samples = 5000;
    let r = certify_matrix(DMatrix::identity(3, 3), &cfg).unwrap();
    let (k1, l1) = r.expectations.unwrap();
    assert!(k1.mean < l1.mean);
    assert_eq!(r.certificate.expected_k1, k1.mean);
}

#[test]
fn certify_rejects_bad_k() {
    let cfg = CertifyConfig::new(MatrixKind::Nullspace, 5);
    assert!(matches!(
        certify_matrix(DMatrix::identity(4, 4), &cfg),
        Err(Error::BadK { .. })
    ));
}
