//! Two-sided bounds on `L^2 = max_{v in {-1,1}^n} v^T G v` for a Gram
//! matrix `G = F F^T`.
//!
//! Upper bounds come from the MaxCut semidefinite relaxation (certified
//! through dual repair) and from the analytic dual point `w = lambda_max 1`.
//! Lower bounds come from Gaussian sign rounding of the relaxation's primal
//! solution, and exactly by enumeration on small instances.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, psd_factor, sym_eig};
use crate::rng::{stream_rng, NormalSampler};
use crate::sdp::{
    dual_repair_identity, solve_sdp, LinearConstraint, SdpOptions, SdpProblem, SdpStatus,
};

/// Largest `n` accepted by [`l_exact_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

pub(crate) fn check_gram(gram: &DMatrix<f64>) -> Result<()> {
    let n = gram.nrows();
    if n == 0 || gram.ncols() != n {
        return Err(Error::Dimension(format!(
            "Gram matrix must be square and non-empty, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = asymmetry(gram);
    if asym > 1e-12 {
        return Err(Error::NonSymmetric(asym));
    }
    Ok(())
}

/// `v^T G v`.
pub(crate) fn quad_form(gram: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut total = 0.0;
    for j in 0..n {
        if v[j] == 0.0 {
            continue;
        }
        let col = gram.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += col[i] * v[i];
        }
        total += v[j] * s;
    }
    total
}

/// Exact `L^2` by enumerating sign vectors with `v_0 = +1` in Gray-code
/// order. Returns the value and a maximizing sign vector.
pub fn l_exact_with_vector(gram: &DMatrix<f64>) -> Result<(f64, Vec<i8>)> {
    check_gram(gram)?;
    let n = gram.nrows();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut v = vec![1.0f64; n];
    let mut gv: Vec<f64> = (0..n).map(|i| gram.row(i).sum()).collect();
    let mut val: f64 = gv.iter().sum();
    let mut best = val;
    let mut best_v = v.clone();
    for t in 1u64..(1u64 << (n - 1)) {
        let j = t.trailing_zeros() as usize + 1;
        let vj = v[j];
        val += 4.0 * (gram[(j, j)] - vj * gv[j]);
        let col = gram.column(j);
        for i in 0..n {
            gv[i] -= 2.0 * vj * col[i];
        }
        v[j] = -vj;
        if val > best {
            best = val;
            best_v.copy_from_slice(&v);
        }
    }
    let exact = quad_form(gram, &best_v);
    Ok((exact, best_v.iter().map(|&x| x as i8).collect()))
}

/// Exact `L^2 = max_{v in {-1,1}^n} v^T G v` for `n <= 20`.
pub fn l_exact_bruteforce(gram: &DMatrix<f64>) -> Result<f64> {
    Ok(l_exact_with_vector(gram)?.0)
}

/// `max Tr(G X)  s.t.  diag(X) = 1, X >= 0`.
pub fn maxcut_problem(gram: &DMatrix<f64>) -> Result<SdpProblem> {
    check_gram(gram)?;
    let n = gram.nrows();
    let mut p = SdpProblem::new(gram.clone())?;
    for i in 0..n {
        p.add(LinearConstraint::eq(vec![(i, i, 1.0)], 1.0))?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxcutUpper {
    /// Certified: the better of the repaired relaxation dual and the
    /// analytic dual point.
    pub upper_sdp: f64,
    /// `n * lambda_max(G)`.
    pub upper_quick: f64,
    /// Primal objective reported by the solver (not a certificate).
    pub solver_value: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    #[serde(skip)]
    pub x: DMatrix<f64>,
}

pub fn maxcut_upper(gram: &DMatrix<f64>, opts: &SdpOptions) -> Result<MaxcutUpper> {
    let p = maxcut_problem(gram)?;
    let n = gram.nrows();
    let upper_quick = n as f64 * sym_eig(gram)?.max_value();
    let sol = solve_sdp(&p, opts)?;
    let repaired = dual_repair_identity(&p, &sol.dual)?;
    Ok(MaxcutUpper {
        upper_sdp: repaired.bound.min(upper_quick),
        upper_quick,
        solver_value: sol.objective,
        status: sol.status,
        iterations: sol.iterations,
        x: sol.x,
    })
}

/// Turns an approximately feasible MaxCut primal into a Gaussian sampling
/// factor `R` (`R R^T` PSD with unit diagonal).
fn unit_diagonal_factor(x: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Dimension(format!(
            "X must be {n}x{n}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let dev = (0..n).fold(0.0f64, |a, i| a.max((x[(i, i)] - 1.0).abs()));
    if !(dev <= 1e-6) {
        return Err(Error::BadX(dev));
    }
    let sym = (x + x.transpose()) * 0.5;
    let mut r = psd_factor(&sym)?;
    for i in 0..n {
        let norm = r.row(i).norm();
        if norm == 0.0 {
            return Err(Error::BadX(1.0));
        }
        r.row_mut(i).unscale_mut(norm);
    }
    Ok(r)
}

/// Best of `samples` sign roundings `v = sign(z)`, `z ~ N(0, X)`, with
/// `sign(0) = +1`. Sample `s` draws from substream `s` of `seed`, so a run
/// with more samples extends the same sequence.
pub fn gw_round_lower(
    gram: &DMatrix<f64>,
    x: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<(f64, Vec<i8>)> {
    check_gram(gram)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let n = gram.nrows();
    let r = unit_diagonal_factor(x, n)?;
    let (best_idx, best_val) = (0..samples)
        .into_par_iter()
        .map(|s| {
            let v = gw_sample(&r, seed, s as u64);
            (s, quad_form(gram, &v))
        })
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    let v = gw_sample(&r, seed, best_idx as u64);
    Ok((best_val, v.iter().map(|&x| x as i8).collect()))
}

fn gw_sample(r: &DMatrix<f64>, seed: u64, stream: u64) -> Vec<f64> {
    let n = r.nrows();
    let mut rng = stream_rng(seed, stream);
    let mut ns = NormalSampler::new();
    let mut g = DVector::zeros(r.ncols());
    ns.fill(&mut rng, g.as_mut_slice());
    let z = r * g;
    (0..n).map(|i| if z[i] >= 0.0 { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone)]
pub struct LBoundOptions {
    pub samples: usize,
    pub seed: u64,
    /// Enumerate exactly when `n` is at most this.
    pub exact_limit: usize,
    pub sdp: SdpOptions,
}

impl Default for LBoundOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            exact_limit: 16,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LBoundReport {
    pub lower: f64,
    pub upper_sdp: f64,
    pub upper_quick: f64,
    pub exact: Option<f64>,
    pub best_v: Vec<i8>,
    pub solver_value: f64,
    pub solver_status: SdpStatus,
    pub solver_iterations: usize,
}

impl LBoundReport {
    /// Certified upper bound on `L` itself.
    pub fn l_upper(&self) -> f64 {
        self.upper_sdp.min(self.upper_quick).max(0.0).sqrt()
    }
}

pub fn l_bounds(gram: &DMatrix<f64>, opts: &LBoundOptions) -> Result<LBoundReport> {
    let up = maxcut_upper(gram, &opts.sdp)?;
    let (lower, best_v) = gw_round_lower(gram, &up.x, opts.samples, opts.seed)?;
    let exact = if gram.nrows() <= opts.exact_limit.min(BRUTE_FORCE_LIMIT) {
        Some(l_exact_bruteforce(gram)?)
    } else {
        None
    };
    Ok(LBoundReport {
        lower,
        upper_sdp: up.upper_sdp,
        upper_quick: up.upper_quick,
        exact,
        best_v,
        solver_value: up.solver_value,
        solver_status: up.status,
        solver_iterations: up.iterations,
    })
}
