//! Small dense semidefinite programs.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    Tr(C Z)
//! subject to  Tr(A_i Z) = b_i         (equalities)
//!             Tr(A_j Z) <= b_j        (inequalities)
//!             0 <= Z_ij <= 1          (optional, on a leading block)
//!             Z >= 0                  (PSD)
//! ```
//!
//! and solved by over-relaxed ADMM on the conic form `Ax + s = b, s in K`
//! over `x = svec(Z)`. Constraints touching `diag(X) diag(X)^T` are handled
//! by lifting `X` into `[[X, d], [d^T, 1]]` with `d = diag(X)`.

mod admm;
mod conic;
mod repair;

use nalgebra::DMatrix;
use serde::Serialize;

pub use admm::{solve_sdp, SdpOptions};
pub use repair::{dual_repair_identity, DualEstimate, RepairedDual};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintKind {
    Eq,
    Le,
}

/// `sum coef * Z_ij  (kind)  rhs`. A term `(i, j, c)` with `i != j` puts
/// coefficient `c` on the single symmetric unknown `Z_ij = Z_ji`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, usize, f64)>,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn eq(terms: Vec<(usize, usize, f64)>, rhs: f64) -> Self {
        Self {
            terms,
            kind: ConstraintKind::Eq,
            rhs,
        }
    }

    pub fn le(terms: Vec<(usize, usize, f64)>, rhs: f64) -> Self {
        Self {
            terms,
            kind: ConstraintKind::Le,
            rhs,
        }
    }

    /// `Tr(A Z)` for a symmetric dense `A`.
    pub fn from_matrix(a: &DMatrix<f64>, kind: ConstraintKind, rhs: f64) -> Self {
        let n = a.nrows();
        let mut terms = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j {
                    a[(i, i)]
                } else {
                    a[(i, j)] + a[(j, i)]
                };
                if v != 0.0 {
                    terms.push((i, j, v));
                }
            }
        }
        Self { terms, kind, rhs }
    }

    pub fn eval(&self, z: &DMatrix<f64>) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * z[(i, j)]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    objective: DMatrix<f64>,
    constraints: Vec<LinearConstraint>,
    unit_box: bool,
    schur_lift: bool,
    identity_combination: Option<Vec<(usize, f64)>>,
}

impl SdpProblem {
    pub fn new(objective: DMatrix<f64>) -> Result<Self> {
        let s = objective.nrows();
        if s == 0 || objective.ncols() != s {
            return Err(Error::Dimension("objective must be square and non-empty".into()));
        }
        let asym = crate::linalg::asymmetry(&objective);
        if asym > 1e-12 {
            return Err(Error::NonSymmetric(asym));
        }
        Ok(Self {
            objective,
            constraints: Vec::new(),
            unit_box: false,
            schur_lift: false,
            identity_combination: None,
        })
    }

    pub fn size(&self) -> usize {
        self.objective.nrows()
    }

    pub fn objective(&self) -> &DMatrix<f64> {
        &self.objective
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn add(&mut self, c: LinearConstraint) -> Result<()> {
        let s = self.size();
        if let Some(&(i, j, _)) = c.terms.iter().find(|&&(i, j, _)| i >= s || j >= s) {
            return Err(Error::Dimension(format!(
                "constraint term ({i}, {j}) outside a {s}x{s} variable"
            )));
        }
        if !c.rhs.is_finite() || c.terms.iter().any(|t| !t.2.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn with(mut self, c: LinearConstraint) -> Result<Self> {
        self.add(c)?;
        Ok(self)
    }

    /// Imposes `0 <= X_ij <= 1` on every entry.
    pub fn with_unit_box(mut self) -> Self {
        self.unit_box = true;
        self
    }

    /// Imposes `X - diag(X) diag(X)^T >= 0` through the lifted block
    /// `[[X, diag(X)], [diag(X)^T, 1]] >= 0`.
    pub fn with_schur_lift(mut self) -> Self {
        self.schur_lift = true;
        self
    }

    /// Declares `sum_r g_r A_r = I` for the given `(constraint index, g_r)`
    /// pairs, for problems whose identity direction is not made of rows
    /// proportional to `I` or to single diagonal entries. Checked when the
    /// dual is repaired.
    pub fn with_identity_combination(mut self, coeffs: Vec<(usize, f64)>) -> Self {
        self.identity_combination = Some(coeffs);
        self
    }

    pub(crate) fn identity_combination(&self) -> Option<&[(usize, f64)]> {
        self.identity_combination.as_deref()
    }

    pub fn has_unit_box(&self) -> bool {
        self.unit_box
    }

    pub fn has_schur_lift(&self) -> bool {
        self.schur_lift
    }

    /// Order of the PSD variable actually solved for.
    pub fn conic_size(&self) -> usize {
        self.size() + usize::from(self.schur_lift)
    }

    /// All constraints on the conic variable: the user constraints, then
    /// those generated by the lift (linking `Z_{i,s} = Z_ii`, the corner
    /// `Z_{s,s} = 1`, and the implied bounds `Z_ii <= 1`).
    pub(crate) fn conic_constraints(&self) -> Vec<LinearConstraint> {
        let mut all = self.constraints.clone();
        if self.schur_lift {
            let s = self.size();
            for i in 0..s {
                all.push(LinearConstraint::eq(vec![(i, s, 1.0), (i, i, -1.0)], 0.0));
            }
            all.push(LinearConstraint::eq(vec![(s, s, 1.0)], 1.0));
            for i in 0..s {
                all.push(LinearConstraint::le(vec![(i, i, 1.0)], 1.0));
            }
        }
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Converged,
    IterCap,
    Infeasible,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    /// Primal `X` (the leading block when lifted), exactly PSD.
    #[serde(skip)]
    pub x: DMatrix<f64>,
    /// `Tr(C X)` at the returned `X`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    #[serde(skip)]
    pub dual: DualEstimate,
}

impl SdpSolution {
    pub fn converged(&self) -> bool {
        self.status == SdpStatus::Converged
    }
}

#[cfg(test)]
mod tests;
