//! Basis-pursuit decoding `min ||x||_1 s.t. Ax = b` and the recovery-trial
//! harness built on it.
//!
//! The decoder runs ADMM on the split `x = z` (affine projection for `x`,
//! soft thresholding for `z`) with a cached Cholesky factor of `A A^T`.
//! Every few iterations the support of `z` is polished by a least-squares
//! solve, and an LP dual point is assembled from the ADMM multiplier. A
//! solution is accepted only when its duality gap is within tolerance.
//! Degenerate programs on which ADMM stalls are finished by an exact dense
//! simplex crossover, accepted under the same gap test.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{check_k, Error, Result};
use crate::linalg::k_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BpOptions {
    /// Relative feasibility and duality-gap tolerance.
    pub tol: f64,
    pub iter_cap: usize,
    /// Iterations between convergence checks and polishing attempts.
    pub check_every: usize,
    /// ADMM iterations before the simplex crossover is attempted.
    pub crossover_after: usize,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            iter_cap: 100_000,
            check_every: 25,
            crossover_after: 2000,
        }
    }
}

impl BpOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BpSolution {
    pub x: Vec<f64>,
    pub l1: f64,
    /// `||Ax - b||_2`.
    pub residual: f64,
    /// Certified lower bound `b^T y` with `||A^T y||_inf <= 1`.
    pub dual_bound: f64,
    /// `||x||_1 - dual_bound`.
    pub gap: f64,
    pub iterations: usize,
    pub method: BpMethod,
}

/// Which stage of the decoder produced the accepted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BpMethod {
    Admm,
    Polished,
    Simplex,
}

struct Projector<'a> {
    a: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> Projector<'a> {
    fn new(a: &'a DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let sv = a.singular_values();
        let smax = sv.max();
        let rank_tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax;
        if sv.min() <= rank_tol {
            let svd = a.clone().svd(true, true);
            let x = svd
                .solve(b, rank_tol)
                .map_err(|e| Error::InvalidArgument(e.into()))?;
            if (a * x - b).norm() > 1e-10 * b.norm().max(1.0) {
                return Err(Error::Infeasible("b is not in the range of A".into()));
            }
            return Err(Error::InvalidArgument("coding matrix is not full row rank".into()));
        }
        let chol = Cholesky::new(a * a.transpose())
            .ok_or_else(|| Error::InvalidArgument("coding matrix is not full row rank".into()))?;
        Ok(Self { a, chol })
    }

    /// `(A A^T)^{-1} A v`.
    fn coeffs(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(self.a * v))
    }

    /// Projection of `v` onto `{x : Ax = b}`.
    fn project(&self, v: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let r = self.a * v - b;
        v - self.a.transpose() * self.chol.solve(&r)
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Scales `y` so that `||A^T y||_inf <= 1` and returns the dual value `b^T y`.
fn dual_value(a: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let aty = a.transpose() * y;
    let m = aty.amax();
    let s = if m > 1.0 { 1.0 / m } else { 1.0 };
    s * b.dot(y)
}

/// Least-squares refit of `b` on the columns in `support`, together with a
/// dual point matching the signs of the refit on that support.
fn polish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    support: &[usize],
    y0: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (q, n) = a.shape();
    if support.is_empty() || support.len() > q {
        return None;
    }
    let a_s = a.select_columns(support);
    let gram = a_s.transpose() * &a_s;
    let chol = Cholesky::new(gram)?;
    let xs = chol.solve(&(a_s.transpose() * b));
    let mut x = DVector::zeros(n);
    for (p, &j) in support.iter().enumerate() {
        x[j] = xs[p];
    }
    let signs = DVector::from_iterator(support.len(), xs.iter().map(|v| v.signum()));
    let y = y0 + &a_s * chol.solve(&(signs - a_s.transpose() * y0));
    Some((x, y))
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let p = t[(row, col)];
    let width = t.ncols();
    for j in 0..width {
        t[(row, j)] /= p;
    }
    for i in 0..t.nrows() {
        if i == row {
            continue;
        }
        let f = t[(i, col)];
        if f != 0.0 {
            for j in 0..width {
                let v = t[(row, j)];
                t[(i, j)] -= f * v;
            }
        }
    }
    basis[row] = col;
}

/// Primal simplex on tableau `t` (last column is the right-hand side) over
/// entering columns `0..allowed`. Dantzig pricing switches to Bland's rule
/// after a run of degenerate pivots. Returns false on unboundedness or when
/// the pivot budget runs out.
fn optimize(
    t: &mut DMatrix<f64>,
    basis: &mut [usize],
    cost: impl Fn(usize) -> f64,
    allowed: usize,
    pivots: &mut usize,
    pivot_cap: usize,
) -> bool {
    let rhs = t.ncols() - 1;
    let mut bland = false;
    let mut degenerate_run = 0;
    loop {
        let mut entering = None;
        let mut best = -1e-10;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let d = cost(j) - (0..t.nrows()).map(|i| cost(basis[i]) * t[(i, j)]).sum::<f64>();
            if d < best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = d;
            }
        }
        let Some(col) = entering else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.nrows() {
            let c = t[(i, col)];
            if c > 1e-9 {
                let ratio = t[(i, rhs)] / c;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best || (ratio == best && basis[i] < basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, step)) = leave else {
            return false;
        };
        if step <= 1e-12 {
            degenerate_run += 1;
            if degenerate_run > 50 {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        pivot(t, basis, row, col);
        *pivots += 1;
        if *pivots > pivot_cap {
            return false;
        }
    }
}

/// Exact basis pursuit by a two-phase dense simplex on
/// `min 1^T (u + v) s.t. A (u - v) = b, u, v >= 0`. Returns the primal point
/// and the dual multiplier of the final basis, both recomputed from the
/// original data.
fn simplex_bp(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    pivot_cap: usize,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (q, n) = a.shape();
    let structural = 2 * n;
    let cols = structural + q;
    let mut t = DMatrix::<f64>::zeros(q, cols + 1);
    for i in 0..q {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = s * a[(i, j)];
            t[(i, n + j)] = -s * a[(i, j)];
        }
        t[(i, structural + i)] = 1.0;
        t[(i, cols)] = s * b[i];
    }
    let mut basis: Vec<usize> = (structural..cols).collect();
    let mut pivots = 0;
    let artificial_cost = |j: usize| if j >= structural { 1.0 } else { 0.0 };
    if !optimize(&mut t, &mut basis, artificial_cost, cols, &mut pivots, pivot_cap) {
        return None;
    }
    let infeasibility: f64 = (0..q)
        .filter(|&i| basis[i] >= structural)
        .map(|i| t[(i, cols)])
        .sum();
    if infeasibility > 1e-9 * b.norm().max(1.0) {
        return None;
    }
    for r in 0..q {
        if basis[r] >= structural {
            let col = (0..structural)
                .filter(|j| !basis.contains(j))
                .max_by(|&i, &j| t[(r, i)].abs().total_cmp(&t[(r, j)].abs()))?;
            if t[(r, col)].abs() <= 1e-9 {
                return None;
            }
            pivot(&mut t, &mut basis, r, col);
        }
    }
    if !optimize(&mut t, &mut basis, |_| 1.0, structural, &mut pivots, pivot_cap) {
        return None;
    }

    let column = |j: usize| {
        let sign = if j < n { 1.0 } else { -1.0 };
        a.column(j % n) * sign
    };
    let mut bm = DMatrix::<f64>::zeros(q, q);
    for (p, &j) in basis.iter().enumerate() {
        bm.set_column(p, &column(j));
    }
    let xb = bm.clone().lu().solve(b)?;
    let y = bm.transpose().lu().solve(&DVector::from_element(q, 1.0))?;
    let mut x = DVector::zeros(n);
    for (p, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] += xb[p];
        } else {
            x[j - n] -= xb[p];
        }
    }
    Some((x, y))
}

/// Solves `min ||x||_1 s.t. Ax = b` for a full-row-rank `A`. On success
/// `||Ax - b|| <= tol max(1, ||b||)` and the certified duality gap is at
/// most `tol max(1, ||x||_1)`.
pub fn basis_pursuit(a: &DMatrix<f64>, b: &[f64], opts: &BpOptions) -> Result<BpSolution> {
    let (q, n) = a.shape();
    if b.len() != q {
        return Err(Error::Dimension(format!("b has length {}, expected {q}", b.len())));
    }
    if q == 0 || n == 0 || q > n {
        return Err(Error::Dimension(format!("coding matrix must be q x n with 0 < q <= n, got {q}x{n}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let b = DVector::from_column_slice(b);
    let proj = Projector::new(a, &b)?;
    let b_norm = b.norm();
    let feas_tol = opts.tol * b_norm.max(1.0);

    if b_norm == 0.0 {
        return Ok(BpSolution {
            x: vec![0.0; n],
            l1: 0.0,
            residual: 0.0,
            dual_bound: 0.0,
            gap: 0.0,
            iterations: 0,
            method: BpMethod::Admm,
        });
    }

    let accept = |x: &DVector<f64>, y: &DVector<f64>, it: usize, method: BpMethod| {
        let residual = (a * x - &b).norm();
        let l1 = x.lp_norm(1);
        let dual_bound = dual_value(a, &b, y);
        let gap = l1 - dual_bound;
        (residual <= feas_tol && gap <= opts.tol * l1.max(1.0)).then(|| BpSolution {
            x: x.iter().copied().collect(),
            l1,
            residual,
            dual_bound,
            gap,
            iterations: it,
            method,
        })
    };

    // Least-norm solution sets the scale of the penalty.
    let x0 = a.transpose() * proj.chol.solve(&b);
    let mut rho = n as f64 / x0.lp_norm(1).max(f64::MIN_POSITIVE);
    let mut z = x0;
    let mut u = DVector::<f64>::zeros(n);
    for it in 1..=opts.iter_cap {
        let x = proj.project(&(&z - &u), &b);
        let z_old = z.clone();
        let t = 1.0 / rho;
        z = DVector::from_iterator(n, x.iter().zip(u.iter()).map(|(xi, ui)| soft(xi + ui, t)));
        u += &x - &z;

        if it % opts.check_every != 0 {
            continue;
        }
        let w = &u * rho;
        let y = proj.coeffs(&w);
        let zmax = z.amax();
        let support: Vec<usize> = (0..n).filter(|&i| z[i].abs() > 1e-9 * zmax).collect();
        if let Some((xp, yp)) = polish(a, &b, &support, &y) {
            if let Some(sol) = accept(&xp, &yp, it, BpMethod::Polished) {
                return Ok(sol);
            }
        }
        if let Some(sol) = accept(&x, &y, it, BpMethod::Admm) {
            return Ok(sol);
        }
        if it == opts.crossover_after {
            if let Some((xs, ys)) = simplex_bp(a, &b, 50 * (n + q)) {
                if let Some(sol) = accept(&xs, &ys, it, BpMethod::Simplex) {
                    return Ok(sol);
                }
            }
        }

        let r = (&x - &z).norm();
        let s = rho * (&z - &z_old).norm();
        if r > 10.0 * s {
            rho *= 2.0;
            u /= 2.0;
        } else if s > 10.0 * r {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    Err(Error::NoConvergence(opts.iter_cap))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryTrial {
    pub e: Vec<f64>,
    pub x_lp: Vec<f64>,
    /// `x_lp - e`.
    pub eta: Vec<f64>,
    pub success: bool,
    /// `||eta||_{k,1} / ||eta||_1`, `None` when `eta = 0`.
    pub nsp_ratio: Option<f64>,
    pub eta_l1: f64,
    pub k: usize,
    pub success_tol: f64,
}

/// Default success tolerance `1e-4 max(1, ||e||_inf)`.
pub fn default_success_tol(e: &[f64]) -> f64 {
    1e-4 * e.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Decodes `b = A e` and compares the result with `e`.
pub fn recovery_trial(
    a: &DMatrix<f64>,
    e: &[f64],
    k: usize,
    success_tol: f64,
    opts: &BpOptions,
) -> Result<RecoveryTrial> {
    let n = a.ncols();
    if e.len() != n {
        return Err(Error::Dimension(format!("signal has length {}, expected {n}", e.len())));
    }
    check_k(k, n)?;
    let ev = DVector::from_column_slice(e);
    let b = a * &ev;
    let sol = basis_pursuit(a, b.as_slice(), opts)?;
    let eta: Vec<f64> = sol.x.iter().zip(e).map(|(x, e)| x - e).collect();
    let eta_l1: f64 = eta.iter().map(|v| v.abs()).sum();
    let nsp_ratio = if eta_l1 > 0.0 {
        Some(k_norm(&eta, k)? / eta_l1)
    } else {
        None
    };
    let success = eta.iter().all(|v| v.abs() <= success_tol);
    Ok(RecoveryTrial {
        e: e.to_vec(),
        x_lp: sol.x,
        eta,
        success,
        nsp_ratio,
        eta_l1,
        k,
        success_tol,
    })
}

/// `||e||_1` minus the sum of the `k` largest magnitudes: the `l1` error of
/// the best `k`-term approximation.
pub fn best_k_term_error(e: &[f64], k: usize) -> Result<f64> {
    let l1: f64 = e.iter().map(|v| v.abs()).sum();
    Ok((l1 - k_norm(e, k)?).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBoundCheck {
    /// False when the trial's ratio exceeds `alpha` (bound vacuous).
    pub applicable: bool,
    pub holds: bool,
    /// `||eta||_1`.
    pub error: f64,
    /// `2 / (1 - 2 alpha) * best_k_term_error(e, k) + 1e-8`.
    pub bound: f64,
}

/// Checks `||x_lp - e||_1 <= 2 / (1 - 2 alpha) ||e - e_k||_1` for a trial
/// whose residual satisfies `||eta||_{k,1} <= alpha ||eta||_1`.
pub fn check_error_bound(trial: &RecoveryTrial, k: usize, alpha: f64) -> Result<ErrorBoundCheck> {
    if !(alpha < 0.5) {
        return Err(Error::BadAlpha(alpha));
    }
    let tail = best_k_term_error(&trial.e, k)?;
    let bound = 2.0 / (1.0 - 2.0 * alpha) * tail + 1e-8;
    let ratio = match trial.nsp_ratio {
        None => {
            return Ok(ErrorBoundCheck {
                applicable: true,
                holds: true,
                error: 0.0,
                bound,
            })
        }
        Some(r) if trial.k == k => r,
        Some(_) => k_norm(&trial.eta, k)? / trial.eta_l1,
    };
    let applicable = ratio <= alpha;
    Ok(ErrorBoundCheck {
        applicable,
        holds: !applicable || trial.eta_l1 <= bound,
        error: trial.eta_l1,
        bound,
    })
}
