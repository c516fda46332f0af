use nalgebra::DMatrix;
use serde::Serialize;

use super::eigen::sym_eig;
use crate::error::{Error, Result};

/// Coding matrix `A` (q x n) with the relative singular-value cutoff used to
/// decide its rank.
#[derive(Debug, Clone)]
pub struct CodingMatrix {
    data: DMatrix<f64>,
    rank_tol: f64,
}

impl CodingMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let rank_tol = f64::EPSILON * data.nrows().max(data.ncols()) as f64;
        Self::with_rank_tol(data, rank_tol)
    }

    pub fn with_rank_tol(data: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension("coding matrix must be non-empty".into()));
        }
        if data.nrows() > data.ncols() {
            return Err(Error::Dimension(format!(
                "coding matrix must have q <= n, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !(rank_tol >= 0.0) {
            return Err(Error::InvalidArgument("rank_tol must be nonnegative".into()));
        }
        Ok(Self { data, rank_tol })
    }

    pub fn q(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn spectral_norm(&self) -> f64 {
        self.data.singular_values().max()
    }
}

/// Basis `F` (n x m) of the nullspace together with the derived quantities
/// every bound needs.
#[derive(Debug, Clone, Serialize)]
pub struct NullspaceBasis {
    #[serde(skip)]
    basis: DMatrix<f64>,
    #[serde(skip)]
    gram: DMatrix<f64>,
    pub row_norms: Vec<f64>,
    pub spec_norm: f64,
    /// Whether the columns were verified orthonormal.
    pub orthonormal: bool,
}

impl NullspaceBasis {
    /// Wraps an orthonormal-column basis, checking `||F^T F - I||_max <= 1e-10`.
    pub fn orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let m = basis.ncols();
        let ftf = basis.transpose() * &basis;
        let dev = (ftf - DMatrix::<f64>::identity(m, m)).amax();
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (deviation {dev:e})"
            )));
        }
        let mut b = Self::from_raw(basis)?;
        b.orthonormal = true;
        Ok(b)
    }

    /// Wraps an arbitrary basis matrix (e.g. a Gaussian ensemble draw). The
    /// model `y ~ N(0, I_m)` is then taken on this representative as given.
    pub fn from_raw(basis: DMatrix<f64>) -> Result<Self> {
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if basis.nrows() == 0 || basis.ncols() == 0 {
            return Err(Error::Dimension("nullspace basis must have m >= 1".into()));
        }
        let mut gram = &basis * basis.transpose();
        let n = gram.nrows();
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let row_norms = (0..basis.nrows())
            .map(|i| basis.row(i).norm())
            .collect::<Vec<_>>();
        let ftf = basis.transpose() * &basis;
        let ftf = (&ftf + ftf.transpose()) * 0.5;
        let spec_norm = sym_eig(&ftf)?.max_value().max(0.0).sqrt();
        Ok(Self {
            basis,
            gram,
            row_norms,
            spec_norm,
            orthonormal: false,
        })
    }

    /// Re-orthonormalizes the column space of an arbitrary basis.
    pub fn orthonormalized(basis: DMatrix<f64>) -> Result<Self> {
        let n = basis.nrows();
        let m = basis.ncols();
        let svd = basis.clone().svd(true, false);
        let u = svd.u.ok_or_else(|| Error::NoConvergence(0))?;
        let smax = svd.singular_values.max();
        let cut = f64::EPSILON * n.max(m) as f64 * smax;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cut)
            .collect();
        if keep.is_empty() {
            return Err(Error::ZeroInput);
        }
        let q = DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]);
        Self::orthonormal(q)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `F F^T`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn m(&self) -> usize {
        self.basis.ncols()
    }

    pub fn sum_row_norms(&self) -> f64 {
        self.row_norms.iter().sum()
    }

    /// `lambda_max(F F^T) = ||F||_2^2`.
    pub fn gram_lambda_max(&self) -> f64 {
        self.spec_norm * self.spec_norm
    }
}

/// Orthonormal basis of `null(A)` from the SVD of `A`.
///
/// The row space is read off the right singular vectors above the rank
/// cutoff; the nullspace basis is the unit-eigenvalue eigenspace of the
/// complementary projector, which is perfectly conditioned.
pub fn nullspace_basis(a: &CodingMatrix) -> Result<NullspaceBasis> {
    let q = a.q();
    let n = a.n();
    let svd = a.data().clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NoConvergence(0))?;
    let smax = svd.singular_values.max();
    let cut = a.rank_tol() * smax;
    let rows: Vec<usize> = if smax == 0.0 {
        Vec::new()
    } else {
        (0..svd.singular_values.len().min(q))
            .filter(|&i| svd.singular_values[i] > cut)
            .collect()
    };
    let rank = rows.len();
    if rank >= n {
        return Err(Error::FullRank);
    }
    let m = n - rank;
    let mut proj = DMatrix::<f64>::identity(n, n);
    for &r in &rows {
        let v = v_t.row(r);
        for j in 0..n {
            for i in 0..n {
                proj[(i, j)] -= v[i] * v[j];
            }
        }
    }
    let proj = (&proj + proj.transpose()) * 0.5;
    let eig = sym_eig(&proj)?;
    let f = DMatrix::from_fn(n, m, |i, j| eig.vectors[(i, n - m + j)]);
    NullspaceBasis::orthonormal(f)
}
