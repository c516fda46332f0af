use nalgebra::DMatrix;

use super::*;
use crate::linalg::NullspaceBasis;
use crate::maxcut::l_exact_bruteforce;
use crate::rng::{stream_rng, NormalSampler};

const TOL: f64 = 1e-6;

fn opts() -> SdpOptions {
    SdpOptions::default()
}

fn random_basis(seed: u64, n: usize, m: usize) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut ns = NormalSampler::new();
    DMatrix::from_fn(n, m, |_, _| ns.sample(&mut rng)).qr().q()
}

fn random_gram(seed: u64, n: usize, m: usize) -> DMatrix<f64> {
    let f = random_basis(seed, n, m);
    let g = &f * f.transpose();
    (&g + g.transpose()) * 0.5
}

/// Direct evaluation of `v^T G v` over all of `{-1,0,1}^n`.
fn naive_sigma(g: &DMatrix<f64>, k: usize) -> f64 {
    let n = g.nrows();
    let mut best = 0.0f64;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let d = c % 3;
                c /= 3;
                [0.0, 1.0, -1.0][d]
            })
            .collect();
        if v.iter().filter(|x| **x != 0.0).count() > k {
            continue;
        }
        let mut val = 0.0;
        for i in 0..n {
            for j in 0..n {
                val += v[i] * g[(i, j)] * v[j];
            }
        }
        best = best.max(val);
    }
    best
}

/// Best `w(S)` over all subsets of exactly `k` vertices.
fn best_subset(m: &DMatrix<f64>, k: usize) -> f64 {
    let n = m.nrows();
    (0u32..(1 << n))
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| {
            let set: Vec<usize> = (0..n).filter(|i| s >> i & 1 == 1).collect();
            subset_weight(m, &set)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn instance_structure() {
    let f = NullspaceBasis::orthonormal(DMatrix::from_element(1, 1, 1.0)).unwrap();
    let inst = build_instance(&f, 1).unwrap();
    assert_eq!(
        inst.weights(),
        &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
    );
    let inst = KDenseInstance::from_gram(&DMatrix::identity(2, 2), 2).unwrap();
    let eye = DMatrix::<f64>::identity(2, 2);
    let m = inst.weights();
    assert_eq!(m.view((0, 0), (2, 2)), eye);
    assert_eq!(m.view((2, 2), (2, 2)), eye);
    assert_eq!(m.view((0, 2), (2, 2)), -&eye);
    assert_eq!(m.view((2, 0), (2, 2)), -&eye);
    for seed in 0..5 {
        let g = random_gram(seed, 6, 3);
        let inst = KDenseInstance::from_gram(&g, 3).unwrap();
        assert!((inst.weights().trace() - 2.0 * g.trace()).abs() < 1e-12);
        let eig = sym_eig(inst.weights()).unwrap();
        assert!(eig.min_value() >= -1e-9 * eig.max_value());
    }
    assert!(matches!(
        KDenseInstance::from_gram(&DMatrix::identity(2, 2), 3),
        Err(Error::BadK { .. })
    ));
    assert!(matches!(
        KDenseInstance::from_gram(&DMatrix::identity(2, 2), 0),
        Err(Error::BadK { .. })
    ));
}

#[test]
fn exact_examples() {
    assert!((sigma_exact_bruteforce(&DMatrix::identity(4, 4), 2).unwrap() - 2.0).abs() < 1e-15);
    let ones = DMatrix::from_element(2, 2, 1.0);
    assert_eq!(sigma_exact_bruteforce(&ones, 1).unwrap(), 1.0);
    assert_eq!(sigma_exact_bruteforce(&ones, 2).unwrap(), 4.0);
    assert_eq!(sigma_exact_bruteforce(&DMatrix::identity(5, 5), 1).unwrap(), 1.0);
    assert!(matches!(
        sigma_exact_bruteforce(&DMatrix::identity(15, 15), 2),
        Err(Error::TooLarge { .. })
    ));
}

#[test]
fn exact_matches_naive_enumeration() {
    for seed in 0..12 {
        let n = 3 + seed as usize % 5;
        let g = random_gram(seed, n, (n / 2).max(1));
        for k in 1..=n {
            let (fast, v) = sigma_exact_with_vector(&g, k).unwrap();
            let slow = naive_sigma(&g, k);
            assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "seed {seed} k {k}");
            assert!(v.iter().filter(|&&x| x != 0).count() <= k);
        }
    }
}

#[test]
fn exact_is_monotone_with_correct_endpoints() {
    for seed in 0..10 {
        let n = 6 + 2 * (seed as usize % 2);
        let g = random_gram(100 + seed, n, n / 2);
        let vals: Vec<f64> = (1..=n).map(|k| sigma_exact_bruteforce(&g, k).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let max_diag = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
        assert!((vals[0] - max_diag).abs() <= 1e-9);
        assert!((vals[n - 1] - l_exact_bruteforce(&g).unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn sqk2_examples() {
    let eye = KDenseInstance::from_weights(DMatrix::identity(2, 2), 2).unwrap();
    let r = sqk2_upper(&eye, &opts()).unwrap();
    assert!((r.certified - 2.0).abs() < 1e-4, "{}", r.certified);
    let r = sqk2_upper(&eye.with_k(1).unwrap(), &opts()).unwrap();
    assert!((r.certified - 1.0).abs() < 1e-4, "{}", r.certified);
    assert!(r.certified >= 1.0 - 1e-9);
}

#[test]
fn sqk3_examples() {
    let eye = KDenseInstance::from_weights(DMatrix::identity(2, 2), 2).unwrap();
    let r = sqk3_upper(&eye, &opts()).unwrap();
    assert!((r.certified - 2.0).abs() < 1e-4, "{}", r.certified);
    assert!(matches!(
        sqk3_upper(&eye.with_k(1).unwrap(), &opts()),
        Err(Error::BadK { .. })
    ));
}

#[test]
fn feige_examples() {
    let eye = KDenseInstance::from_weights(DMatrix::identity(2, 2), 1).unwrap();
    let r = feige_upper(&eye, &opts()).unwrap();
    assert!((r.certified - 1.0).abs() < 1e-4, "{:?}", r);
    let r = feige_upper(&eye.with_k(2).unwrap(), &opts()).unwrap();
    assert!((r.certified - 2.0).abs() < 1e-4, "{}", r.certified);
}

#[test]
fn sdpk_examples() {
    let eye = KDenseInstance::from_weights(DMatrix::identity(2, 2), 1).unwrap();
    let r = sdpk_upper(&eye, &opts()).unwrap();
    assert!((r.certified - 1.0).abs() < 1e-4);
    let ones = KDenseInstance::from_weights(DMatrix::from_element(2, 2, 1.0), 1).unwrap();
    let r = sdpk_upper(&ones, &opts()).unwrap();
    assert!((r.certified - 2.0).abs() < 1e-4, "{}", r.certified);
    assert!((r.x[(0, 1)] - 0.5).abs() < 1e-3);
}

#[test]
fn relaxations_sandwich_exact_on_small_instances() {
    for seed in 0..30 {
        let g = random_gram(200 + seed, 4, 2);
        for k in 1..=4 {
            let exact = sigma_exact_bruteforce(&g, k).unwrap();
            let inst = KDenseInstance::from_gram(&g, k).unwrap();
            let floor = exact * (1.0 - 1e-6);
            let sqk2 = sqk2_upper(&inst, &opts()).unwrap();
            assert!(sqk2.certified >= floor, "sqk2 seed {seed} k {k}");
            let plus = sqk2_plus_upper(&inst, 10, &opts()).unwrap();
            assert!(plus.certified >= floor, "sqk2+ seed {seed} k {k}");
            assert!(plus.certified <= sqk2.certified + TOL);
            if k >= 2 {
                let sqk3 = sqk3_upper(&inst, &opts()).unwrap();
                assert!(sqk3.certified >= floor, "sqk3 seed {seed} k {k}");
                assert!(
                    sqk3.certified <= sqk2.certified + 1e-4 * sqk2.certified.max(1.0),
                    "sqk3 {} vs sqk2 {} seed {seed} k {k}",
                    sqk3.certified,
                    sqk2.certified
                );
            }
            let feige = feige_upper(&inst, &opts()).unwrap();
            assert!(feige.certified >= floor, "feige seed {seed} k {k}");
            let sdpk = sdpk_upper(&inst, &opts()).unwrap();
            assert!(sdpk.certified >= floor, "sdpk seed {seed} k {k}");
        }
    }
}

#[test]
fn greedy_prune_examples() {
    assert_eq!(prune_guarantee(4, 2, 12.0), 2.0);
    let ones = DMatrix::from_element(4, 4, 1.0);
    let (set, w) = greedy_prune(&ones, &[0, 1, 2, 3], 2).unwrap();
    assert_eq!(set, vec![2, 3]);
    assert_eq!(w, 4.0);
    assert!(w >= 16.0 * 2.0 / 12.0);
    assert!(matches!(greedy_prune(&ones, &[0, 1], 1), Err(Error::BadK { .. })));
    assert!(matches!(greedy_prune(&ones, &[0, 1], 3), Err(Error::BadK { .. })));
}

#[test]
fn greedy_prune_respects_guarantee_and_optimum() {
    for seed in 0..20 {
        let g = random_gram(300 + seed, 4, 2);
        let m = KDenseInstance::from_gram(&g, 1).unwrap().weights().clone();
        let all: Vec<usize> = (0..8).collect();
        let w_all = subset_weight(&m, &all);
        for k in 2..=6 {
            let (set, w) = greedy_prune(&m, &all, k).unwrap();
            assert_eq!(set.len(), k);
            assert!(w <= best_subset(&m, k) + 1e-12);
            assert!(w >= prune_guarantee(8, k, w_all) - 1e-12);
        }
    }
}

#[test]
fn hybrid_rounding_on_diagonal_weights() {
    let n = 6;
    let k = 3;
    let inst = KDenseInstance::from_weights(DMatrix::identity(n, n), k).unwrap();
    let x = DMatrix::from_diagonal_element(n, n, k as f64 / n as f64);
    let r = hybrid_round_lower(&inst, &x, 500, 7).unwrap();
    assert_eq!(r.value, k as f64);
    assert_eq!(r.indicator.iter().filter(|&&b| b == 1).count(), k);
}

#[test]
fn hybrid_rounding_prunes_to_budget() {
    // Uniform probabilities of 1 and a rank-one correlation: every index
    // is kept, so each sample has 4 vertices and must be pruned to 2.
    let inst = KDenseInstance::from_weights(DMatrix::from_element(4, 4, 1.0), 2).unwrap();
    let x = DMatrix::from_element(4, 4, 0.5);
    let r = hybrid_round_lower(&inst, &x, 50, 1).unwrap();
    assert!(r.indicator.iter().filter(|&&b| b == 1).count() <= 2);
    assert!(r.pruned_samples > 0);
    assert_eq!(r.value, 4.0);
    assert!(matches!(
        hybrid_round_lower(&inst, &DMatrix::zeros(4, 4), 10, 1),
        Err(Error::BadX(_))
    ));
}

#[test]
fn hybrid_rounding_fraction_of_relaxation() {
    let mut hits = 0;
    for seed in 0..100 {
        let g = random_gram(400 + seed, 6, 3);
        let inst = KDenseInstance::from_gram(&g, 3).unwrap();
        let sdpk = sdpk_upper(&inst, &opts()).unwrap();
        let r = hybrid_round_lower(&inst, &sdpk.x, 2000, seed).unwrap();
        let exact = sigma_exact_bruteforce(&g, 3).unwrap();
        assert!(r.value <= exact + 1e-9);
        assert!(r.indicator.iter().map(|&b| b as usize).sum::<usize>() <= 3);
        if r.value >= 0.25 * sdpk.certified {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}");
}

#[test]
fn mu_regimes() {
    assert!(matches!(approx_ratio_mu(8.0, 2.0), Err(Error::OutOfRegime(_))));
    assert!(matches!(approx_ratio_mu(1000.0, 5.0), Err(Error::OutOfRegime(_))));
    // 2 pi 10^4 exp(-10^{2/3} / 3) is about 1.3e4, so the denominator is
    // negative even at n = 10^6.
    assert!(matches!(approx_ratio_mu(1e6, 1e4), Err(Error::OutOfRegime(_))));
    let (n, k) = (1e30f64, 1e12f64);
    let want = (1.0 - 2.0 / k.powf(1.0 / 3.0))
        / (1.0 - 2.0 * std::f64::consts::PI * n * n / (k * k) * (-(n.powf(1.0 / 9.0)) / 3.0).exp());
    assert!((approx_ratio_mu(n, k).unwrap() - want).abs() < 1e-12);
    assert!((approx_ratio_mu(8.0, 1e30).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn report_examples() {
    let f = DMatrix::<f64>::identity(4, 4);
    let rep = sigma_bounds(&(&f * f.transpose()), 1, &SigmaOptions::default()).unwrap();
    assert_eq!(rep.exact, Some(1.0));
    for r in [&rep.sqk2, &rep.feige, &rep.sdpk].into_iter().flatten() {
        assert!(r.certified >= 1.0 - 1e-9);
    }
    assert!(rep.quick.value >= 1.0);

    let g = random_gram(17, 6, 3);
    let o = SigmaOptions {
        methods: vec![SigmaMethod::Maxcut],
        ..SigmaOptions::default()
    };
    let rep = sigma_bounds(&g, 6, &o).unwrap();
    let mc = crate::maxcut::maxcut_upper(&g, &opts()).unwrap();
    assert!((rep.upper - mc.upper_sdp).abs() <= TOL * mc.upper_sdp);

    let g = random_gram(18, 8, 4);
    let o = SigmaOptions {
        methods: SigmaMethod::ALL.to_vec(),
        ..SigmaOptions::default()
    };
    let rep = sigma_bounds(&g, 3, &o).unwrap();
    let exact = rep.exact.unwrap();
    assert!(rep.lower <= exact + 1e-9);
    assert!(exact <= rep.upper * (1.0 + 1e-6));
    assert!(rep.lower <= rep.upper * (1.0 + 1e-6));
    assert!(rep.greedy_from_rounding.unwrap() <= exact + 1e-9);
}

#[test]
fn method_names_round_trip() {
    for m in SigmaMethod::ALL {
        assert_eq!(SigmaMethod::parse(m.name()).unwrap(), m);
    }
    assert!(SigmaMethod::parse("bogus").is_err());
}
