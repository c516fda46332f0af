//! Vectorized conic form shared by the solver and the dual repair.

use std::f64::consts::SQRT_2;

use super::{ConstraintKind, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::sym_eig_rows;

/// Packed column-major index of `(i, j)`, `i <= j`.
#[inline]
pub(crate) fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packs a symmetric row-major buffer, scaling off-diagonals by sqrt(2) so
/// that `svec(A) . svec(B) = Tr(AB)`.
pub(crate) fn svec_from_dense(a: &[f64], n: usize, out: &mut [f64]) {
    for j in 0..n {
        let base = j * (j + 1) / 2;
        for i in 0..j {
            out[base + i] = SQRT_2 * a[i * n + j];
        }
        out[base + j] = a[j * n + j];
    }
}

pub(crate) fn dense_from_svec(v: &[f64], n: usize, out: &mut [f64]) {
    for j in 0..n {
        let base = j * (j + 1) / 2;
        for i in 0..j {
            let x = v[base + i] / SQRT_2;
            out[i * n + j] = x;
            out[j * n + i] = x;
        }
        out[j * n + j] = v[base + j];
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }

    pub fn axpy(&self, a: f64, out: &mut [f64]) {
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i] += a * v;
        }
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `min c.x  s.t.  a_r.x (=|<=) b_r,  0 <= x_e <= u_e,  x in svec(PSD)`.
#[derive(Debug, Clone)]
pub(crate) struct Conic {
    pub n: usize,
    pub dim: usize,
    pub c: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub kinds: Vec<ConstraintKind>,
    pub rhs: Vec<f64>,
    /// svec indices carrying the unit box, with their svec-scale upper bound.
    pub box_idx: Vec<usize>,
    pub box_ub: Vec<f64>,
    pub identity_hint: Option<Vec<(usize, f64)>>,
}

impl Conic {
    pub fn from_problem(p: &SdpProblem) -> Self {
        let n = p.conic_size();
        let dim = svec_len(n);
        let s = p.size();
        let mut cdense = vec![0.0; n * n];
        for j in 0..s {
            for i in 0..s {
                cdense[i * n + j] = -p.objective()[(i, j)];
            }
        }
        let mut c = vec![0.0; dim];
        svec_from_dense(&cdense, n, &mut c);

        let cons = p.conic_constraints();
        let mut rows = Vec::with_capacity(cons.len());
        let mut kinds = Vec::with_capacity(cons.len());
        let mut rhs = Vec::with_capacity(cons.len());
        let mut scratch = vec![0.0; dim];
        let mut touched = Vec::new();
        for con in &cons {
            for &(i, j, v) in &con.terms {
                let k = svec_index(i, j);
                let w = if i == j { v } else { v / SQRT_2 };
                if scratch[k] == 0.0 {
                    touched.push(k);
                }
                scratch[k] += w;
            }
            touched.sort_unstable();
            touched.dedup();
            let mut idx = Vec::with_capacity(touched.len());
            let mut val = Vec::with_capacity(touched.len());
            for &k in &touched {
                if scratch[k] != 0.0 {
                    idx.push(k);
                    val.push(scratch[k]);
                }
                scratch[k] = 0.0;
            }
            touched.clear();
            rows.push(SparseRow { idx, val });
            kinds.push(con.kind);
            rhs.push(con.rhs);
        }

        let mut box_idx = Vec::new();
        let mut box_ub = Vec::new();
        if p.has_unit_box() {
            for j in 0..s {
                for i in 0..=j {
                    box_idx.push(svec_index(i, j));
                    box_ub.push(if i == j { 1.0 } else { SQRT_2 });
                }
            }
        }
        Self {
            n,
            dim,
            c,
            rows,
            kinds,
            rhs,
            box_idx,
            box_ub,
            identity_hint: p.identity_combination().map(<[_]>::to_vec),
        }
    }

    /// Coefficients `g_r` with `sum_r g_r A_r = I`: the problem's declared
    /// combination if any (verified), otherwise either one row
    /// proportional to the identity or one single-diagonal-entry row per
    /// index. Inequality rows may only enter with `g_r > 0`.
    pub fn identity_direction(&self) -> Result<Vec<(usize, f64)>> {
        let n = self.n;
        let diag: Vec<usize> = (0..n).map(|i| svec_index(i, i)).collect();
        let usable = |r: usize, g: f64| self.kinds[r] == ConstraintKind::Eq || g > 0.0;

        if let Some(hint) = &self.identity_hint {
            let mut sum = vec![0.0; self.dim];
            for &(r, g) in hint {
                if r >= self.rows.len() || !usable(r, g) {
                    return Err(Error::NoIdentityDirection);
                }
                self.rows[r].axpy(g, &mut sum);
            }
            let err = (0..self.dim).fold(0.0f64, |a, e| {
                let want = if diag.contains(&e) { 1.0 } else { 0.0 };
                a.max((sum[e] - want).abs())
            });
            if err > 1e-10 {
                return Err(Error::NoIdentityDirection);
            }
            return Ok(hint.clone());
        }

        for (r, row) in self.rows.iter().enumerate() {
            if row.idx.len() != n || row.idx != diag {
                continue;
            }
            let a = row.val[0];
            if a != 0.0 && row.val.iter().all(|&v| v == a) && usable(r, 1.0 / a) {
                return Ok(vec![(r, 1.0 / a)]);
            }
        }

        let mut pick: Vec<Option<(usize, f64)>> = vec![None; n];
        for (r, row) in self.rows.iter().enumerate() {
            if row.idx.len() != 1 {
                continue;
            }
            let k = row.idx[0];
            let Some(i) = diag.iter().position(|&d| d == k) else {
                continue;
            };
            let g = 1.0 / row.val[0];
            if !usable(r, g) {
                continue;
            }
            let better = match pick[i] {
                None => true,
                Some((prev, _)) => {
                    self.kinds[prev] != ConstraintKind::Eq && self.kinds[r] == ConstraintKind::Eq
                }
            };
            if better {
                pick[i] = Some((r, g));
            }
        }
        pick.into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::NoIdentityDirection)
    }
}

/// Projection of `svec` data onto the PSD cone, in place. Returns the
/// smallest eigenvalue before projection.
pub(crate) fn project_psd(v: &mut [f64], n: usize, dense: &mut Vec<f64>) -> Result<f64> {
    dense.resize(n * n, 0.0);
    dense_from_svec(v, n, dense);
    let (vals, vecs) = sym_eig_rows(dense.clone(), n)?;
    let lmin = vals.first().copied().unwrap_or(0.0);
    let npos = vals.iter().filter(|&&l| l > 0.0).count();
    let nneg = vals.iter().filter(|&&l| l < 0.0).count();
    if nneg == 0 {
        return Ok(lmin);
    }
    // Whichever side of the spectrum is smaller gets the rank-one updates:
    // Z = sum_{l>0} l w w^T  or  Z = S - sum_{l<0} l w w^T.
    if npos <= nneg {
        dense.iter_mut().for_each(|x| *x = 0.0);
        for (k, &lam) in vals.iter().enumerate().filter(|(_, &l)| l > 0.0) {
            add_rank_one(dense, &vecs[k * n..(k + 1) * n], lam, n);
        }
    } else {
        for (k, &lam) in vals.iter().enumerate().filter(|(_, &l)| l < 0.0) {
            add_rank_one(dense, &vecs[k * n..(k + 1) * n], -lam, n);
        }
    }
    for i in 0..n {
        for j in 0..i {
            dense[i * n + j] = dense[j * n + i];
        }
    }
    svec_from_dense(dense, n, v);
    Ok(lmin)
}

/// Upper triangle of `z += lam * w w^T` (row-major, `z[i*n+j]`, `i <= j`).
fn add_rank_one(z: &mut [f64], w: &[f64], lam: f64, n: usize) {
    if lam == 0.0 {
        return;
    }
    for i in 0..n {
        let a = lam * w[i];
        if a == 0.0 {
            continue;
        }
        let row = &mut z[i * n + i..i * n + n];
        for (zij, &wj) in row.iter_mut().zip(&w[i..]) {
            *zij += a * wj;
        }
    }
}

/// Smallest eigenvalue of the matrix packed in `v`.
pub(crate) fn min_eig_svec(v: &[f64], n: usize) -> Result<f64> {
    let mut dense = vec![0.0; n * n];
    dense_from_svec(v, n, &mut dense);
    let (vals, _) = sym_eig_rows(dense, n)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}
