//! Semidefinite relaxations of `max u^T M u` over `u in {0,1}^N`,
//! `1^T u <= k`. Every returned `certified` value is a repaired dual bound.

use nalgebra::DMatrix;
use serde::Serialize;

use super::KDenseInstance;
use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use crate::sdp::{
    dual_repair_identity, solve_sdp, ConstraintKind, LinearConstraint, SdpOptions, SdpProblem,
    SdpSolution, SdpStatus,
};

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationValue {
    /// Certified upper bound (dual repaired).
    pub certified: f64,
    /// Primal objective reported by the solver, on the same scale.
    pub solver_value: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Cuts added after the first solve (adaptive variant only).
    pub cuts_added: usize,
    /// Primal solution of the last solve, in the problem's own variable.
    #[serde(skip)]
    pub x: DMatrix<f64>,
}

fn solve_certified(p: &SdpProblem, scale: f64, opts: &SdpOptions) -> Result<(RelaxationValue, SdpSolution)> {
    let sol = solve_sdp(p, opts)?;
    let rep = dual_repair_identity(p, &sol.dual)?;
    Ok((
        RelaxationValue {
            certified: rep.bound * scale,
            solver_value: sol.objective * scale,
            status: sol.status,
            iterations: sol.iterations,
            cuts_added: 0,
            x: sol.x.clone(),
        },
        sol,
    ))
}

/// All `(i, j, c)` terms of `1^T X 1`, `i <= j`.
fn sum_all_terms(n: usize, diag: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            t.push((i, j, if i == j { diag } else { 2.0 }));
        }
    }
    t
}

fn sqk2_problem(inst: &KDenseInstance) -> Result<SdpProblem> {
    let n = inst.dim();
    let k = inst.k() as f64;
    Ok(SdpProblem::new(inst.weights().clone())?
        .with(LinearConstraint::le(sum_all_terms(n, 1.0), k * k))?
        .with_schur_lift())
}

/// `max Tr(MX)  s.t.  1^T X 1 <= k^2,  X - diag(X) diag(X)^T >= 0`.
pub fn sqk2_upper(inst: &KDenseInstance, opts: &SdpOptions) -> Result<RelaxationValue> {
    Ok(solve_certified(&sqk2_problem(inst)?, 1.0, opts)?.0)
}

/// Row cuts valid for every `X = u u^T` with `u` binary and `1^T u <= k`:
/// `sum_j X_ij <= k X_ii` and `sum_j (X_jj - X_ij) <= k (1 - X_ii)`.
fn row_cuts(n: usize, k: f64) -> Vec<LinearConstraint> {
    let mut cuts = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut terms: Vec<(usize, usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (i.min(j), i.max(j), 1.0))
            .collect();
        terms.push((i, i, 1.0 - k));
        cuts.push(LinearConstraint::le(terms, 0.0));

        let mut terms: Vec<(usize, usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .flat_map(|j| [(j, j, 1.0), (i.min(j), i.max(j), -1.0)])
            .collect();
        terms.push((i, i, k));
        cuts.push(LinearConstraint::le(terms, k));
    }
    cuts
}

/// SQK2 tightened by row cuts: after a first solve, the
/// `max(10, max_added)` most violated cuts are added and the problem is
/// solved once more. The result never exceeds the plain bound.
pub fn sqk2_plus_upper(
    inst: &KDenseInstance,
    max_added: usize,
    opts: &SdpOptions,
) -> Result<RelaxationValue> {
    let n = inst.dim();
    let mut p = sqk2_problem(inst)?;
    let (plain, sol) = solve_certified(&p, 1.0, opts)?;
    let mut violated: Vec<(f64, LinearConstraint)> = row_cuts(n, inst.k() as f64)
        .into_iter()
        .map(|c| (c.eval(&sol.x) - c.rhs, c))
        .filter(|(v, _)| *v > opts.tol)
        .collect();
    if violated.is_empty() {
        return Ok(plain);
    }
    violated.sort_by(|a, b| b.0.total_cmp(&a.0));
    violated.truncate(max_added.max(10));
    let added = violated.len();
    for (_, c) in violated {
        p.add(c)?;
    }
    let (mut cut, _) = solve_certified(&p, 1.0, opts)?;
    cut.cuts_added = added;
    if cut.certified > plain.certified {
        let mut keep = plain;
        keep.cuts_added = added;
        return Ok(keep);
    }
    Ok(cut)
}

/// `max Tr(MX)  s.t.  Tr((11^T - I) X) <= k(k-1),  X - diag(X) diag(X)^T >= 0`,
/// for `k >= 2`.
pub fn sqk3_upper(inst: &KDenseInstance, opts: &SdpOptions) -> Result<RelaxationValue> {
    let n = inst.dim();
    let k = inst.k();
    if k < 2 {
        return Err(Error::BadK { k, min: 2, max: n });
    }
    let k = k as f64;
    let p = SdpProblem::new(inst.weights().clone())?
        .with(LinearConstraint::le(sum_all_terms(n, 0.0), k * (k - 1.0)))?
        .with_schur_lift();
    Ok(solve_certified(&p, 1.0, opts)?.0)
}

/// The `{-1,1}` lift `u = (1 + y) / 2` with moment matrix
/// `Z = [[1, y^T], [y, Y]] >= 0`, `diag(Y) = 1`, `Y 1 = (2k - N) y`,
/// maximizing `Tr(M (11^T + y1^T + 1y^T + Y))`; values are divided by 4.
///
/// When `2k = N` the constraints force `Z (0, 1, ..., 1)^T = 0`, so `Z` has
/// no interior; the program is then solved over `Z = P W P^T` with `P` an
/// orthonormal basis of the complement of that vector.
pub fn feige_upper(inst: &KDenseInstance, opts: &SdpOptions) -> Result<RelaxationValue> {
    let n = inst.dim();
    let m = inst.weights();
    let s = n + 1;
    let row_sums: Vec<f64> = (0..n).map(|i| m.row(i).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let c = DMatrix::from_fn(s, s, |i, j| match (i, j) {
        (0, 0) => total,
        (0, j) => row_sums[j - 1],
        (i, 0) => row_sums[i - 1],
        (i, j) => m[(i - 1, j - 1)],
    });
    let c = (&c + c.transpose()) * 0.5;
    let card = 2.0 * inst.k() as f64 - n as f64;

    if card != 0.0 {
        let mut p = SdpProblem::new(c)?;
        for i in 0..s {
            p.add(LinearConstraint::eq(vec![(i, i, 1.0)], 1.0))?;
        }
        for i in 1..s {
            let mut terms: Vec<(usize, usize, f64)> =
                (1..s).map(|j| (i.min(j), i.max(j), 1.0)).collect();
            terms.push((0, i, -card));
            p.add(LinearConstraint::eq(terms, 0.0))?;
        }
        return Ok(solve_certified(&p, 0.25, opts)?.0);
    }

    let basis = complement_basis(s);
    let reduced = basis.transpose() * &c * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mut p = SdpProblem::new(reduced)?;
    for i in 0..s {
        let a = basis.row(i).transpose();
        p.add(LinearConstraint::from_matrix(
            &(&a * a.transpose()),
            ConstraintKind::Eq,
            1.0,
        ))?;
    }
    let p = p.with_identity_combination((0..s).map(|i| (i, 1.0)).collect());
    let (mut value, _) = solve_certified(&p, 0.25, opts)?;
    value.x = &basis * &value.x * basis.transpose();
    Ok(value)
}

/// Orthonormal basis (as columns) of the complement of `(0, 1, ..., 1)` in
/// dimension `s`.
fn complement_basis(s: usize) -> DMatrix<f64> {
    let n = s - 1;
    let mut proj = DMatrix::<f64>::identity(s, s);
    for i in 1..s {
        for j in 1..s {
            proj[(i, j)] -= 1.0 / n as f64;
        }
    }
    let eig = sym_eig(&proj).expect("projector is symmetric and finite");
    eig.vectors.columns(1, n).into_owned()
}

/// `max Tr(MX)  s.t.  0 <= X_ij <= 1,  Tr X = k,  X >= 0`.
pub fn sdpk_upper(inst: &KDenseInstance, opts: &SdpOptions) -> Result<RelaxationValue> {
    let n = inst.dim();
    let p = SdpProblem::new(inst.weights().clone())?
        .with(LinearConstraint::eq(
            (0..n).map(|i| (i, i, 1.0)).collect(),
            inst.k() as f64,
        ))?
        .with_unit_box();
    Ok(solve_certified(&p, 1.0, opts)?.0)
}
