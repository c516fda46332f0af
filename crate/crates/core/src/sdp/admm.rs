//! Over-relaxed ADMM on `min c.x  s.t.  Ax + s = b, s in K`.
//!
//! `K` is the product of the zero cone (equalities), the nonnegative orthant
//! (inequalities and box rows) and the svec PSD cone. The `x`-update solves
//! with `A^T A = D + B^T B`, where `D` is diagonal (identity from the PSD
//! rows plus the box rows) and `B` holds the general constraint rows; the
//! Woodbury identity reduces this to one Cholesky factorization of a
//! `p x p` matrix, which does not depend on the penalty, so the penalty can
//! adapt without refactoring.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use super::conic::{dense_from_svec, project_psd, Conic, SparseRow};
use super::repair::DualEstimate;

use super::{ConstraintKind, SdpProblem, SdpSolution, SdpStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdpOptions {
    pub tol: f64,
    pub iter_cap: usize,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub check_every: usize,
    /// Largest box violation of the returned `X` accepted as converged.
    pub box_tol: f64,
    /// When set, convergence also requires the dual-weighted constraint
    /// violation of the returned `X` to be at most this (absolute, in
    /// objective units). That quantity bounds how far `Tr(C X)` can exceed
    /// the optimum.
    pub objective_tol: Option<f64>,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            iter_cap: 50_000,
            alpha: 1.5,
            rho: 1.0,
            adaptive_rho: true,
            check_every: 10,
            box_tol: 1e-7,
            objective_tol: None,
        }
    }
}

impl SdpOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_objective_tol(mut self, tol: f64) -> Self {
        self.objective_tol = Some(tol);
        self
    }

    pub fn with_iter_cap(mut self, cap: usize) -> Self {
        self.iter_cap = cap;
        self
    }
}

struct Workspace {
    conic: Conic,
    rows: Vec<SparseRow>,
    row_scale: Vec<f64>,
    b_gen: Vec<f64>,
    c: Vec<f64>,
    c_scale: f64,
    d_inv: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl Workspace {
    fn new(p: &SdpProblem) -> Result<Self> {
        let conic = Conic::from_problem(p);
        let mut rows = Vec::with_capacity(conic.rows.len());
        let mut row_scale = Vec::with_capacity(conic.rows.len());
        let mut b_gen = Vec::with_capacity(conic.rows.len());
        for (r, row) in conic.rows.iter().enumerate() {
            let nr = row.norm();
            let rhs = conic.rhs[r];
            if nr == 0.0 {
                let bad = match conic.kinds[r] {
                    ConstraintKind::Eq => rhs != 0.0,
                    ConstraintKind::Le => rhs < 0.0,
                };
                if bad {
                    return Err(Error::Infeasible(format!(
                        "constraint {r} has no terms but right-hand side {rhs}"
                    )));
                }
            }
            let scale = if nr > 0.0 { 1.0 / nr } else { 1.0 };
            rows.push(SparseRow {
                idx: row.idx.clone(),
                val: row.val.iter().map(|v| v * scale).collect(),
            });
            row_scale.push(scale);
            b_gen.push(rhs * scale);
        }
        let cnorm = conic.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c_scale = if cnorm > 0.0 { 1.0 / cnorm } else { 1.0 };
        let c = conic.c.iter().map(|v| v * c_scale).collect();

        let mut d = vec![1.0; conic.dim];
        for &e in &conic.box_idx {
            d[e] += 2.0;
        }
        let d_inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();

        let p_rows = rows.len();
        let chol = if p_rows == 0 {
            None
        } else {
            let mut k = DMatrix::<f64>::identity(p_rows, p_rows);
            let mut t = vec![0.0; conic.dim];
            for r in 0..p_rows {
                for (&i, &v) in rows[r].idx.iter().zip(&rows[r].val) {
                    t[i] = v * d_inv[i];
                }
                for s in r..p_rows {
                    let dot = rows[s].dot(&t);
                    k[(r, s)] += dot;
                    if s != r {
                        k[(s, r)] += dot;
                    }
                }
                for &i in &rows[r].idx {
                    t[i] = 0.0;
                }
            }
            Some(Cholesky::new(k).ok_or_else(|| {
                Error::Infeasible("constraint normal matrix is not positive definite".into())
            })?)
        };
        Ok(Self {
            conic,
            rows,
            row_scale,
            b_gen,
            c,
            c_scale,
            d_inv,
            chol,
        })
    }

    /// `x = (D + B^T B)^{-1} r`.
    fn solve(&self, r: &mut [f64], tmp: &mut DVector<f64>) {
        for (ri, di) in r.iter_mut().zip(&self.d_inv) {
            *ri *= di;
        }
        if let Some(chol) = &self.chol {
            for (k, row) in self.rows.iter().enumerate() {
                tmp[k] = row.dot(r);
            }
            chol.solve_mut(tmp);
            for (k, row) in self.rows.iter().enumerate() {
                let a = tmp[k];
                for (&i, &v) in row.idx.iter().zip(&row.val) {
                    r[i] -= a * v * self.d_inv[i];
                }
            }
        }
    }
}

/// Stacked slack/dual blocks: general rows, box lower, box upper, PSD.
#[derive(Clone)]
struct Blocks {
    gen: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    psd: Vec<f64>,
}

impl Blocks {
    fn zeros(p: usize, nb: usize, dim: usize) -> Self {
        Self {
            gen: vec![0.0; p],
            lo: vec![0.0; nb],
            hi: vec![0.0; nb],
            psd: vec![0.0; dim],
        }
    }

    fn inf_norm(&self) -> f64 {
        self.gen
            .iter()
            .chain(&self.lo)
            .chain(&self.hi)
            .chain(&self.psd)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    fn scale(&mut self, a: f64) {
        for v in self
            .gen
            .iter_mut()
            .chain(self.lo.iter_mut())
            .chain(self.hi.iter_mut())
            .chain(self.psd.iter_mut())
        {
            *v *= a;
        }
    }
}

/// Checks the PSD iterate itself against the original constraints:
/// equalities and inequalities within `tol * max(1, |b|)`, box within
/// `box_tol`.
fn x_feasible(ws: &Workspace, z: &[f64], opts: &SdpOptions) -> bool {
    let conic = &ws.conic;
    for (r, row) in conic.rows.iter().enumerate() {
        let v = row.dot(z) - conic.rhs[r];
        let lim = opts.tol * conic.rhs[r].abs().max(1.0);
        let bad = match conic.kinds[r] {
            ConstraintKind::Eq => v.abs() > lim,
            ConstraintKind::Le => v > lim,
        };
        if bad {
            return false;
        }
    }
    conic.box_idx.iter().zip(&conic.box_ub).all(|(&i, &ub)| {
        let v = z[i] / ub;
        v >= -opts.box_tol && v <= 1.0 + opts.box_tol
    })
}

/// `sum |y_r| |viol_r|` over general rows plus box multipliers times box
/// violations, in the original problem's units.
fn weighted_violation(ws: &Workspace, z: &[f64], lam: &Blocks, ys: f64) -> f64 {
    let conic = &ws.conic;
    let mut total = 0.0;
    for (r, row) in conic.rows.iter().enumerate() {
        let v = row.dot(z) - conic.rhs[r];
        let v = match conic.kinds[r] {
            ConstraintKind::Eq => v.abs(),
            ConstraintKind::Le => v.max(0.0),
        };
        total += (lam.gen[r] * ys * ws.row_scale[r]).abs() * v;
    }
    for (e, (&i, &ub)) in conic.box_idx.iter().zip(&conic.box_ub).enumerate() {
        total += (lam.lo[e] * ys).abs() * (-z[i]).max(0.0);
        total += (lam.hi[e] * ys).abs() * (z[i] - ub).max(0.0);
    }
    total
}

/// Solves `p` to relative accuracy `opts.tol`. Hitting the iteration cap is
/// not an error: the returned solution carries `SdpStatus::IterCap` and its
/// diagnostics, and its dual estimate can still be repaired into a bound.
pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 2.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 2)".into()));
    }
    let ws = Workspace::new(p)?;
    let conic = &ws.conic;
    let n = conic.n;
    let dim = conic.dim;
    let np = ws.rows.len();
    let nb = conic.box_idx.len();
    let alpha = opts.alpha;

    let mut b = Blocks::zeros(np, nb, dim);
    b.gen.copy_from_slice(&ws.b_gen);
    b.hi.copy_from_slice(&conic.box_ub);

    let mut x = vec![0.0; dim];
    let mut s = Blocks::zeros(np, nb, dim);
    let mut lam = Blocks::zeros(np, nb, dim);
    let mut ax = Blocks::zeros(np, nb, dim);
    let mut h = Blocks::zeros(np, nb, dim);
    let mut rhs = vec![0.0; dim];
    let mut tmp = DVector::zeros(np);
    let mut dense = Vec::with_capacity(n * n);
    let mut rho = opts.rho;
    let mut adapt_interval = 5 * opts.check_every.max(1);
    let mut next_adapt = adapt_interval;

    let mut status = SdpStatus::IterCap;
    let mut iterations = 0;
    let (mut pres, mut dres, mut gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for it in 1..=opts.iter_cap {
        iterations = it;
        // x-update: (A^T A) x = A^T (b - s - lam) - c / rho
        rhs.iter_mut()
            .zip(&ws.c)
            .for_each(|(r, c)| *r = -c / rho);
        for (k, row) in ws.rows.iter().enumerate() {
            row.axpy(b.gen[k] - s.gen[k] - lam.gen[k], &mut rhs);
        }
        for (e, &i) in conic.box_idx.iter().enumerate() {
            rhs[i] -= b.lo[e] - s.lo[e] - lam.lo[e];
            rhs[i] += b.hi[e] - s.hi[e] - lam.hi[e];
        }
        for i in 0..dim {
            rhs[i] -= b.psd[i] - s.psd[i] - lam.psd[i];
        }
        ws.solve(&mut rhs, &mut tmp);
        x.copy_from_slice(&rhs);

        // A x
        for (k, row) in ws.rows.iter().enumerate() {
            ax.gen[k] = row.dot(&x);
        }
        for (e, &i) in conic.box_idx.iter().enumerate() {
            ax.lo[e] = -x[i];
            ax.hi[e] = x[i];
        }
        for i in 0..dim {
            ax.psd[i] = -x[i];
        }

        // relaxation, s-update (projection onto K), dual update
        let relax = |h: &mut [f64], ax: &[f64], b: &[f64], s: &[f64]| {
            for i in 0..h.len() {
                h[i] = alpha * ax[i] + (1.0 - alpha) * (b[i] - s[i]);
            }
        };
        relax(&mut h.gen, &ax.gen, &b.gen, &s.gen);
        relax(&mut h.lo, &ax.lo, &b.lo, &s.lo);
        relax(&mut h.hi, &ax.hi, &b.hi, &s.hi);
        relax(&mut h.psd, &ax.psd, &b.psd, &s.psd);

        for k in 0..np {
            let v = b.gen[k] - h.gen[k] - lam.gen[k];
            s.gen[k] = match conic.kinds[k] {
                ConstraintKind::Eq => 0.0,
                ConstraintKind::Le => v.max(0.0),
            };
        }
        for e in 0..nb {
            s.lo[e] = (b.lo[e] - h.lo[e] - lam.lo[e]).max(0.0);
            s.hi[e] = (b.hi[e] - h.hi[e] - lam.hi[e]).max(0.0);
        }
        for i in 0..dim {
            s.psd[i] = b.psd[i] - h.psd[i] - lam.psd[i];
        }
        project_psd(&mut s.psd, n, &mut dense)?;

        let upd = |lam: &mut [f64], h: &[f64], s: &[f64], b: &[f64]| {
            for i in 0..lam.len() {
                lam[i] += h[i] + s[i] - b[i];
            }
        };
        upd(&mut lam.gen, &h.gen, &s.gen, &b.gen);
        upd(&mut lam.lo, &h.lo, &s.lo, &b.lo);
        upd(&mut lam.hi, &h.hi, &s.hi, &b.hi);
        upd(&mut lam.psd, &h.psd, &s.psd, &b.psd);

        if it % opts.check_every.max(1) != 0 && it != opts.iter_cap {
            continue;
        }

        // residuals of the normalized problem, y = rho * lam
        let mut rp = 0.0f64;
        for (((a, sv), bv), _) in ax
            .gen
            .iter()
            .zip(&s.gen)
            .zip(&b.gen)
            .zip(0..)
            .chain(ax.lo.iter().zip(&s.lo).zip(&b.lo).zip(0..))
            .chain(ax.hi.iter().zip(&s.hi).zip(&b.hi).zip(0..))
            .chain(ax.psd.iter().zip(&s.psd).zip(&b.psd).zip(0..))
        {
            rp = rp.max((a + sv - bv).abs());
        }
        let pscale = 1.0 + ax.inf_norm().max(s.inf_norm()).max(b.inf_norm());

        let mut aty = vec![0.0; dim];
        for (k, row) in ws.rows.iter().enumerate() {
            row.axpy(rho * lam.gen[k], &mut aty);
        }
        for (e, &i) in conic.box_idx.iter().enumerate() {
            aty[i] += rho * (lam.hi[e] - lam.lo[e]);
        }
        for i in 0..dim {
            aty[i] -= rho * lam.psd[i];
        }
        let rd = aty
            .iter()
            .zip(&ws.c)
            .fold(0.0f64, |a, (u, c)| a.max((u + c).abs()));
        let dscale = 1.0
            + aty
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()))
                .max(ws.c.iter().fold(0.0f64, |a, v| a.max(v.abs())));

        let pobj: f64 = ws.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        let dobj: f64 = -rho
            * (b.gen.iter().zip(&lam.gen).map(|(b, l)| b * l).sum::<f64>()
                + b.hi.iter().zip(&lam.hi).map(|(b, l)| b * l).sum::<f64>());
        pres = rp / pscale;
        dres = rd / dscale;
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            status = SdpStatus::Infeasible;
            break;
        }
        if pres <= opts.tol
            && dres <= opts.tol
            && gap <= opts.tol
            && x_feasible(&ws, &s.psd, opts)
            && opts.objective_tol.is_none_or(|t| {
                weighted_violation(&ws, &s.psd, &lam, rho / ws.c_scale) <= t
            })
        {
            status = SdpStatus::Converged;
            break;
        }
        // The interval doubles after every change so the penalty settles.
        if opts.adaptive_rho && it >= next_adapt {
            let ratio = pres / dres.max(1e-300);
            next_adapt = it + adapt_interval;
            if !(0.2..=5.0).contains(&ratio) {
                let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                lam.scale(rho / new_rho);
                rho = new_rho;
                adapt_interval *= 2;
                next_adapt = it + adapt_interval;
            }
        }
    }

    // primal: the PSD slack, i.e. the projection of the last iterate
    let mut zfull = vec![0.0; n * n];
    dense_from_svec(&s.psd, n, &mut zfull);
    let size = p.size();
    let xmat = DMatrix::from_fn(size, size, |i, j| zfull[i * n + j]);
    let objective = p.objective().component_mul(&xmat).sum();

    let ys = rho / ws.c_scale;
    let dual = DualEstimate {
        y: lam
            .gen
            .iter()
            .zip(&ws.row_scale)
            .map(|(l, sc)| l * ys * sc)
            .collect(),
        box_lower: lam.lo.iter().map(|l| l * ys).collect(),
        box_upper: lam.hi.iter().map(|l| l * ys).collect(),
    };

    Ok(SdpSolution {
        x: xmat,
        objective,
        primal_residual: pres,
        dual_residual: dres,
        rel_gap: gap,
        iterations,
        status,
        dual,
    })
}
