use nalgebra::DMatrix;

use crate::error::{check_k, Error, Result};

/// `||x||_{k,1}`: sum of the `k` largest magnitudes.
pub fn k_norm(x: &[f64], k: usize) -> Result<f64> {
    check_k(k, x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    Ok(top_k_sum(&mut mags, k))
}

/// Sum of the `k` largest entries of `mags`, reordering it in place.
pub(crate) fn top_k_sum(mags: &mut [f64], k: usize) -> f64 {
    if k >= mags.len() {
        return mags.iter().sum();
    }
    mags.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    mags[..k].iter().sum()
}

/// `NumCard(x) = ||x||_1^2 / ||x||_2^2`.
pub fn num_card(x: &[f64]) -> Result<f64> {
    let l2: f64 = x.iter().map(|v| v * v).sum();
    if l2 == 0.0 {
        return Err(Error::ZeroInput);
    }
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    Ok(l1 * l1 / l2)
}

/// `NumRank(X) = ||X||_F^2 / ||X||_2^2`.
pub fn num_rank(x: &DMatrix<f64>) -> Result<f64> {
    let s2 = spectral_norm(x);
    if s2 == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(x.norm_squared() / (s2 * s2))
}

/// Largest singular value.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.singular_values().max()
}
