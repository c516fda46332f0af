//! Dense symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by implicit QL with
//! Wilkinson-style shifts (the EISPACK `tred2`/`tql2` pair). Eigenvectors are
//! accumulated row-wise: row `k` of the returned buffer is the eigenvector of
//! the `k`-th eigenvalue, which keeps the inner rotation loops contiguous.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Relative asymmetry `max|S_ij - S_ji| / max|S_ij|`.
pub fn asymmetry(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(s[(i, j)].abs());
            if i < j {
                diff = diff.max((s[(i, j)] - s[(j, i)]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Symmetric eigendecomposition `S = V diag(values) V^T`.
pub fn sym_eig(s: &DMatrix<f64>) -> Result<SymEig> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "sym_eig needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = asymmetry(s);
    if asym > 1e-10 {
        return Err(Error::NonSymmetric(asym));
    }
    let n = s.nrows();
    // Column-major storage of a symmetric matrix reads the same as row-major;
    // use the upper triangle mirrored so tiny asymmetries do not leak in.
    let mut buf = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            buf[i * n + j] = v;
            buf[j * n + i] = v;
        }
    }
    let (values, rows) = sym_eig_rows(buf, n)?;
    let vectors = DMatrix::from_fn(n, n, |i, k| rows[k * n + i]);
    Ok(SymEig { values, vectors })
}

/// `R` with `R R^T = V max(values, 0) V^T`, i.e. a square-root factor of
/// the PSD part of `s`. Columns for non-positive eigenvalues are zero.
pub fn psd_factor(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(s)?;
    let mut r = eig.vectors;
    for (k, &l) in eig.values.iter().enumerate() {
        let scale = l.max(0.0).sqrt();
        r.column_mut(k).scale_mut(scale);
    }
    Ok(r)
}

/// Eigendecomposition of a symmetric row-major buffer.
///
/// Returns ascending eigenvalues and a row-major buffer whose row `k` holds
/// the eigenvector of eigenvalue `k`. The caller guarantees symmetry.
pub fn sym_eig_rows(a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    // w[j*n + k] plays the role of V[k][j] in the classical formulation.
    let mut w = a;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut w, &mut d, &mut e, n);
    tql2(&mut w, &mut d, &mut e, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut rows = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        rows[dst * n..(dst + 1) * n].copy_from_slice(&w[src * n..(src + 1) * n]);
    }
    Ok((values, rows))
}

fn tred2(w: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    // V[r][c] == w[c*n + r]
    macro_rules! v {
        ($r:expr, $c:expr) => {
            w[($c) * n + ($r)]
        };
    }
    for j in 0..n {
        d[j] = v!(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v!(i - 1, j);
                v!(i, j) = 0.0;
                v!(j, i) = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v!(j, i) = f;
                let mut g = e[j] + v!(j, j) * f;
                let col = &w[j * n..j * n + n];
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut w[j * n..j * n + n];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v!(n - 1, i) = v!(i, i);
        v!(i, i) = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v!(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v!(k, i + 1) * v!(k, j);
                }
                for k in 0..=i {
                    v!(k, j) -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v!(k, i + 1) = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v!(n - 1, j);
        v!(n - 1, j) = 0.0;
    }
    v!(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

fn tql2(w: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    let cap = 30 * n.max(1);
    let mut total_iter = 0usize;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0 guarantees m < n.
        if m > l {
            loop {
                total_iter += 1;
                if total_iter > cap {
                    return Err(Error::NoConvergence(cap));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_next = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let hv = *b;
                        *b = s * *a + c * hv;
                        *a = c * *a - s * hv;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(s: &DMatrix<f64>, eig: &SymEig) -> f64 {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.values.clone()));
        let r = s * &eig.vectors - &eig.vectors * lam;
        r.amax()
    }

    #[test]
    fn diagonal_and_swap() {
        let e = sym_eig(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
        let e = sym_eig(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let e = sym_eig(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&s), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 1 + trial % 50;
            let mut s = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                }
            }
            let eig = sym_eig(&s).unwrap();
            let norm = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            assert!(residual(&s, &eig) <= 1e-8 * norm, "n={n}");
            let vtv = eig.vectors.transpose() * &eig.vectors;
            assert!((vtv - DMatrix::identity(n, n)).amax() < 1e-10);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        let mut s = DMatrix::from_element(6, 6, 1.0);
        s += DMatrix::identity(6, 6) * 2.0;
        let eig = sym_eig(&s).unwrap();
        for v in &eig.values[..5] {
            assert!((v - 2.0).abs() < 1e-12);
        }
        assert!((eig.values[5] - 8.0).abs() < 1e-12);
    }
}
