//! Turning an approximate dual point into an exactly feasible one.
//!
//! With multipliers `y` on the constraints `Tr(A_r Z) (=|<=) b_r` and
//! `l, u >= 0` on the box, the dual slack of `max Tr(C Z)` is
//! `S = -C + sum_r y_r A_r - L + U`. Whenever `S >= 0` (and the sign
//! conditions hold), weak duality gives `max Tr(C Z) <= b.y + sum U_ij`.
//! If some combination of constraint matrices equals the identity, adding
//! `mu = max(0, -lambda_min(S))` along that combination restores `S >= 0`.

use serde::Serialize;

use super::conic::{min_eig_svec, Conic};
use super::{ConstraintKind, SdpProblem};
use crate::error::{Error, Result};

/// Dual multipliers in the order of the problem's constraints (user
/// constraints first, then those generated by the lift), plus box
/// multipliers in packed upper-triangular column order. Empty box vectors
/// mean zero.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DualEstimate {
    pub y: Vec<f64>,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
}

impl DualEstimate {
    pub fn from_multipliers(y: Vec<f64>) -> Self {
        Self {
            y,
            box_lower: Vec::new(),
            box_upper: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RepairedDual {
    /// Certified upper bound on the optimum.
    pub bound: f64,
    /// Amount added along the identity direction.
    pub shift: f64,
    /// The repaired, feasible dual point.
    pub dual: DualEstimate,
}

pub fn dual_repair_identity(p: &SdpProblem, estimate: &DualEstimate) -> Result<RepairedDual> {
    let conic = Conic::from_problem(p);
    let m = conic.rows.len();
    let nb = conic.box_idx.len();
    if estimate.y.len() != m {
        return Err(Error::Dimension(format!(
            "expected {m} constraint multipliers, got {}",
            estimate.y.len()
        )));
    }
    let box_vec = |v: &[f64]| -> Result<Vec<f64>> {
        match v.len() {
            0 => Ok(vec![0.0; nb]),
            l if l == nb => Ok(v.iter().map(|x| x.max(0.0)).collect()),
            l => Err(Error::Dimension(format!(
                "expected {nb} box multipliers, got {l}"
            ))),
        }
    };
    let box_lower = box_vec(&estimate.box_lower)?;
    let box_upper = box_vec(&estimate.box_upper)?;
    if estimate
        .y
        .iter()
        .chain(&box_lower)
        .chain(&box_upper)
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let mut y: Vec<f64> = estimate
        .y
        .iter()
        .zip(&conic.kinds)
        .map(|(&v, k)| match k {
            ConstraintKind::Eq => v,
            ConstraintKind::Le => v.max(0.0),
        })
        .collect();
    let direction = conic.identity_direction()?;

    let n = conic.n;
    let mut slack = conic.c.clone();
    for (row, &yr) in conic.rows.iter().zip(&y) {
        row.axpy(yr, &mut slack);
    }
    for (e, &i) in conic.box_idx.iter().enumerate() {
        slack[i] += box_upper[e] - box_lower[e];
    }
    let lmin = min_eig_svec(&slack, n)?;
    // Allowance for the rounding error of the eigenvalue itself.
    let scale = slack.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shift = (-lmin + 8.0 * n as f64 * f64::EPSILON * scale).max(0.0);
    for &(r, g) in &direction {
        y[r] += shift * g;
    }

    let bound = y.iter().zip(&conic.rhs).map(|(y, b)| y * b).sum::<f64>()
        + box_upper
            .iter()
            .zip(&conic.box_ub)
            .map(|(u, ub)| u * ub)
            .sum::<f64>();
    Ok(RepairedDual {
        bound,
        shift,
        dual: DualEstimate {
            y,
            box_lower,
            box_upper,
        },
    })
}
