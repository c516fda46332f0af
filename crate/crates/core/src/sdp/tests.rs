use nalgebra::DMatrix;

use super::*;
use crate::linalg::sym_eig;
use crate::rng::{stream_rng, NormalSampler};

const TOL: f64 = 1e-6;

fn opts() -> SdpOptions {
    SdpOptions::default()
}

fn maxcut(g: DMatrix<f64>) -> SdpProblem {
    let n = g.nrows();
    let mut p = SdpProblem::new(g).unwrap();
    for i in 0..n {
        p.add(LinearConstraint::eq(vec![(i, i, 1.0)], 1.0)).unwrap();
    }
    p
}

fn trace_k(g: DMatrix<f64>, k: f64) -> SdpProblem {
    let n = g.nrows();
    SdpProblem::new(g)
        .unwrap()
        .with(LinearConstraint::eq((0..n).map(|i| (i, i, 1.0)).collect(), k))
        .unwrap()
        .with_unit_box()
}

/// `F F^T` for a random `n x m` `F` with orthonormal columns, so that the
/// instances have unit spectral norm.
fn random_gram(seed: u64, n: usize, m: usize) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut ns = NormalSampler::new();
    let f = DMatrix::from_fn(n, m, |_, _| ns.sample(&mut rng)).qr().q();
    let g = &f * f.transpose();
    (&g + g.transpose()) * 0.5
}

#[test]
fn maxcut_identity_has_value_two() {
    let sol = solve_sdp(&maxcut(DMatrix::identity(2, 2)), &opts()).unwrap();
    assert!(sol.converged());
    assert!((sol.objective - 2.0).abs() < 10.0 * TOL);
}

#[test]
fn trace_constrained_identity_has_value_k() {
    let sol = solve_sdp(&trace_k(DMatrix::identity(2, 2), 1.0), &opts()).unwrap();
    assert!(sol.converged());
    assert!((sol.objective - 1.0).abs() < 10.0 * TOL);
}

/// Grid search over `X = [[a, c], [c, b]]` for `max a + b` subject to
/// `a + b + 2c <= 1` and `X - diag(X) diag(X)^T >= 0`. The best `c` for
/// given `(a, b)` is the smallest one the 2x2 PSD condition allows.
fn lifted_identity_oracle(steps: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for ia in 0..=steps {
        for ib in 0..=steps {
            let a = ia as f64 / steps as f64;
            let b = ib as f64 / steps as f64;
            let c = a * b - ((a - a * a) * (b - b * b)).sqrt();
            if a + b + 2.0 * c <= 1.0 + 1e-12 {
                best = best.max(a + b);
            }
        }
    }
    best
}

#[test]
fn lifted_problem_matches_grid_oracle() {
    let oracle = lifted_identity_oracle(400);
    assert!((oracle - 1.0).abs() < 1e-9);
    let p = SdpProblem::new(DMatrix::identity(2, 2))
        .unwrap()
        .with(LinearConstraint::le(
            vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, 2.0)],
            1.0,
        ))
        .unwrap()
        .with_schur_lift();
    let sol = solve_sdp(&p, &opts()).unwrap();
    assert!(sol.converged(), "{:?}", sol.status);
    assert!((sol.objective - 1.0).abs() < 1e-4, "{}", sol.objective);
    let rep = dual_repair_identity(&p, &sol.dual).unwrap();
    assert!(rep.bound >= 1.0 - 1e-9);
    assert!(rep.bound <= 1.0 + 1e-3);
}

#[test]
fn repair_of_zero_multipliers_shifts_to_lambda_max() {
    let p = maxcut(DMatrix::identity(2, 2));
    let rep = dual_repair_identity(&p, &DualEstimate::from_multipliers(vec![0.0, 0.0])).unwrap();
    assert!((rep.shift - 1.0).abs() < 1e-12);
    for y in &rep.dual.y {
        assert!((y - 1.0).abs() < 1e-12);
    }
    assert!((rep.bound - 2.0).abs() < 1e-12);
}

#[test]
fn repair_keeps_feasible_multipliers() {
    let p = maxcut(DMatrix::identity(2, 2));
    let rep = dual_repair_identity(&p, &DualEstimate::from_multipliers(vec![1.0, 1.0])).unwrap();
    assert_eq!(rep.shift, 0.0);
    assert_eq!(rep.bound, 2.0);
}

#[test]
fn repair_needs_identity_direction() {
    let p = SdpProblem::new(DMatrix::identity(2, 2))
        .unwrap()
        .with(LinearConstraint::le(vec![(0, 1, 1.0)], 1.0))
        .unwrap();
    assert!(matches!(
        dual_repair_identity(&p, &DualEstimate::from_multipliers(vec![0.0])),
        Err(Error::NoIdentityDirection)
    ));
    let p = maxcut(DMatrix::identity(2, 2));
    assert!(matches!(
        dual_repair_identity(&p, &DualEstimate::from_multipliers(vec![0.0])),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn weak_duality_on_random_maxcut() {
    for seed in 0..50 {
        let p = maxcut(random_gram(seed, 6, 3));
        let sol = solve_sdp(&p, &opts()).unwrap();
        assert!(sol.converged(), "seed {seed}: {:?}", sol.status);
        let rep = dual_repair_identity(&p, &sol.dual).unwrap();
        assert!(rep.bound >= sol.objective - 10.0 * TOL, "seed {seed}");
        assert!(rep.bound <= sol.objective * 1.01, "seed {seed}");
    }
}

#[test]
fn weak_duality_on_random_trace_box() {
    for seed in 0..50 {
        let p = trace_k(random_gram(100 + seed, 6, 3), 3.0);
        let sol = solve_sdp(&p, &opts()).unwrap();
        assert!(sol.converged(), "seed {seed}: {:?}", sol.status);
        let rep = dual_repair_identity(&p, &sol.dual).unwrap();
        assert!(rep.bound >= sol.objective - 10.0 * TOL, "seed {seed}");
        assert!(rep.bound <= sol.objective * 1.01, "seed {seed}");
    }
}

#[test]
fn converged_solution_is_feasible() {
    for seed in 0..10 {
        let p = trace_k(random_gram(200 + seed, 7, 2), 2.0);
        let sol = solve_sdp(&p, &opts()).unwrap();
        assert!(sol.converged());
        let eig = sym_eig(&sol.x).unwrap();
        assert!(eig.min_value() >= -1e-7 * (1.0 + eig.max_value()));
        let tr = sol.x.trace();
        assert!((tr - 2.0).abs() <= TOL * 3.0 * 10.0);
        for v in sol.x.iter() {
            assert!(*v >= -1e-7 && *v <= 1.0 + 1e-7, "{v}");
        }
        assert!(sol.primal_residual.max(sol.dual_residual).max(sol.rel_gap) <= TOL);
    }
}

#[test]
fn solves_are_deterministic() {
    let p = maxcut(random_gram(7, 5, 2));
    let a = solve_sdp(&p, &opts()).unwrap();
    let b = solve_sdp(&p, &opts()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.x, b.x);
    assert_eq!(a.dual.y, b.dual.y);
}

#[test]
fn iteration_cap_still_returns_diagnostics() {
    let p = maxcut(random_gram(3, 8, 3));
    let sol = solve_sdp(&p, &opts().with_iter_cap(3)).unwrap();
    assert_eq!(sol.status, SdpStatus::IterCap);
    assert_eq!(sol.iterations, 3);
    let rep = dual_repair_identity(&p, &sol.dual).unwrap();
    let exact = solve_sdp(&p, &opts()).unwrap();
    assert!(rep.bound >= exact.objective - 10.0 * TOL);
}

#[test]
fn inconsistent_empty_constraint_is_infeasible() {
    let p = SdpProblem::new(DMatrix::identity(2, 2))
        .unwrap()
        .with(LinearConstraint::eq(vec![(0, 1, 0.0)], 1.0))
        .unwrap();
    assert!(matches!(solve_sdp(&p, &opts()), Err(Error::Infeasible(_))));
}

#[test]
fn rejects_bad_inputs() {
    assert!(SdpProblem::new(DMatrix::zeros(0, 0)).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    assert!(matches!(SdpProblem::new(asym), Err(Error::NonSymmetric(_))));
    let mut p = SdpProblem::new(DMatrix::identity(2, 2)).unwrap();
    assert!(p.add(LinearConstraint::eq(vec![(2, 0, 1.0)], 1.0)).is_err());
    assert!(solve_sdp(&p, &opts().with_tol(0.0)).is_err());
}

#[test]
fn adaptive_penalty_settles_on_boxed_instance() {
    let f = crate::sampling::gaussian_ensemble(8, 4, 7000, 0);
    let g = &f * f.transpose();
    let inst = crate::kdense::KDenseInstance::from_gram(&g, 2).unwrap();
    let p = trace_k(inst.weights().clone(), 2.0);
    let sol = solve_sdp(&p, &opts()).unwrap();
    assert!(sol.converged(), "{:?} after {}", sol.status, sol.iterations);
    let rep = dual_repair_identity(&p, &sol.dual).unwrap();
    assert!(rep.bound >= sol.objective - 10.0 * TOL);
    assert!(rep.bound <= sol.objective * 1.0001);
}

#[test]
fn objective_tolerance_bounds_primal_overshoot() {
    let o = opts().with_objective_tol(1e-6);
    for seed in 0..10 {
        let f = crate::sampling::gaussian_ensemble(10, 5, 6000 + seed, 0);
        let p = maxcut(&f * f.transpose());
        let sol = solve_sdp(&p, &o).unwrap();
        assert!(sol.converged());
        let rep = dual_repair_identity(&p, &sol.dual).unwrap();
        assert!(sol.objective <= rep.bound + 2e-6, "seed {seed}: {} > {}", sol.objective, rep.bound);
    }
}
