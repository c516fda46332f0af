//! Monte-Carlo estimates of `E ||Fy||_{k,1}` and `E ||Fy||_1`, empirical
//! checks of their concentration, and the chi statistics of Gaussian
//! nullspace ensembles.
//!
//! Samples are drawn in fixed-size chunks; chunk `c` uses substream `c` of
//! the configured seed and results are reduced in chunk order, so every
//! statistic is bit-for-bit reproducible regardless of thread count.

use std::f64::consts::FRAC_2_PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_k, Error, Result};
use crate::linalg::{sym_eig, top_k_sum};
use crate::maxcut::maxcut_upper;
use crate::rng::{stream_rng, NormalSampler, StreamRng};
use crate::sdp::SdpOptions;

const CHUNK: usize = 2048;

/// Distribution of the coordinates of `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleModel {
    Gaussian,
    /// Uniform on `[-delta, delta]`.
    Uniform { delta: f64 },
    /// `+-delta` with equal probability.
    Rademacher { delta: f64 },
}

impl SampleModel {
    fn validate(&self) -> Result<()> {
        match *self {
            SampleModel::Gaussian => Ok(()),
            SampleModel::Uniform { delta } | SampleModel::Rademacher { delta } => {
                if delta > 0.0 && delta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("delta = {delta} must be positive")))
                }
            }
        }
    }

    /// Bound on `|y_i|`, if any.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            SampleModel::Gaussian => None,
            SampleModel::Uniform { delta } | SampleModel::Rademacher { delta } => Some(delta),
        }
    }

    fn fill(&self, rng: &mut StreamRng, normals: &mut NormalSampler, out: &mut [f64]) {
        match *self {
            SampleModel::Gaussian => normals.fill(rng, out),
            SampleModel::Uniform { delta } => {
                for v in out {
                    *v = delta * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            SampleModel::Rademacher { delta } => {
                for v in out {
                    *v = if rng.random::<bool>() { delta } else { -delta };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub model: SampleModel,
}

impl McConfig {
    pub fn gaussian(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            model: SampleModel::Gaussian,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McStats {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation over `sqrt(N)`).
    pub stderr: f64,
    pub samples: usize,
}

impl McStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            samples: n,
        }
    }
}

/// `(||Fy||_{k,1}, ||Fy||_1)` for each of `cfg.samples` draws of `y`.
pub fn norm_samples(f: &DMatrix<f64>, k: usize, cfg: &McConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let (n, m) = f.shape();
    check_k(k, n)?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let chunks = cfg.samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(cfg.samples - c * CHUNK);
            let mut rng = stream_rng(cfg.seed, c as u64);
            let mut normals = NormalSampler::new();
            let mut y = DVector::zeros(m);
            let mut mags = vec![0.0; n];
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                cfg.model.fill(&mut rng, &mut normals, y.as_mut_slice());
                let fy = f * &y;
                for (d, v) in mags.iter_mut().zip(fy.iter()) {
                    *d = v.abs();
                }
                let l1: f64 = mags.iter().sum();
                out.push((top_k_sum(&mut mags, k), l1));
            }
            out
        })
        .collect();
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Sample means and standard errors of `||Fy||_{k,1}` and `||Fy||_1`.
pub fn empirical_norm_stats(f: &DMatrix<f64>, k: usize, cfg: &McConfig) -> Result<(McStats, McStats)> {
    let s = norm_samples(f, k, cfg)?;
    let k1: Vec<f64> = s.iter().map(|p| p.0).collect();
    let l1: Vec<f64> = s.iter().map(|p| p.1).collect();
    Ok((McStats::from_values(&k1), McStats::from_values(&l1)))
}

/// Lipschitz constants used as tail scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailScales {
    /// `sigma_k(F)` (or an upper bound).
    pub sigma: f64,
    /// `L(F)` (or an upper bound).
    pub l: f64,
    /// Whether both are exact values rather than upper bounds.
    pub exact: bool,
    /// Constant of the bounded-model inequality.
    pub c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    /// Deviation as a multiple of the scale.
    pub multiple: f64,
    pub x: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error `sqrt(bound (1 - bound) / N)`.
    pub stderr: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub config: McConfig,
    pub k: usize,
    pub scales: TailScales,
    /// Center of the upper tail of `||Fy||_{k,1}` (sample mean).
    pub center_k1: f64,
    /// Center of the lower tail of `||Fy||_1` (closed form under the
    /// Gaussian model, sample mean otherwise).
    pub center_l1: f64,
    /// `P[||Fy||_{k,1} >= center + x]` against the bound with `sigma`.
    pub upper: Vec<TailPoint>,
    /// `P[||Fy||_1 <= center - x]` against the bound with `L`.
    pub lower: Vec<TailPoint>,
    pub violations: usize,
    /// Violations count as failures only under the Gaussian model; the
    /// bounded-model constant is not known.
    pub informational: bool,
}

impl ConcentrationReport {
    /// CSV with header `tail,multiple,x,empirical,bound`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tail,multiple,x,empirical,bound\n");
        for (name, pts) in [("upper", &self.upper), ("lower", &self.lower)] {
            for p in pts {
                let _ = writeln!(s, "{name},{},{},{},{}", p.multiple, p.x, p.empirical, p.bound);
            }
        }
        s
    }
}

fn tail_bound(model: &SampleModel, x: f64, scale: f64, c: f64) -> f64 {
    let t = x / scale;
    match model.delta() {
        None => (-0.5 * t * t).exp(),
        Some(delta) => (c * (-t * t / (c * delta * delta)).exp()).min(1.0),
    }
}

/// Empirical upper tail of `||Fy||_{k,1}` and lower tail of `||Fy||_1`
/// compared with their concentration bounds at `x = multiple * scale`.
/// A point is violated when the frequency exceeds the bound by more than
/// three binomial standard errors.
pub fn verify_concentration(
    f: &DMatrix<f64>,
    k: usize,
    cfg: &McConfig,
    scales: TailScales,
    multiples: &[f64],
) -> Result<ConcentrationReport> {
    if !(scales.sigma > 0.0) || !(scales.l > 0.0) || !(scales.c > 0.0) {
        return Err(Error::InvalidArgument("tail scales must be positive".into()));
    }
    if multiples.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("tail grid must be nonnegative".into()));
    }
    let s = norm_samples(f, k, cfg)?;
    let n = s.len() as f64;
    let center_k1 = s.iter().map(|p| p.0).sum::<f64>() / n;
    let center_l1 = match cfg.model {
        SampleModel::Gaussian => {
            FRAC_2_PI.sqrt() * f.row_iter().map(|r| r.norm()).sum::<f64>()
        }
        _ => s.iter().map(|p| p.1).sum::<f64>() / n,
    };
    let point = |multiple: f64, scale: f64, count: usize| {
        let x = multiple * scale;
        let empirical = count as f64 / n;
        let bound = tail_bound(&cfg.model, x, scale, scales.c);
        let stderr = (bound * (1.0 - bound) / n).sqrt();
        TailPoint {
            multiple,
            x,
            empirical,
            bound,
            stderr,
            violated: empirical > bound + 3.0 * stderr,
        }
    };
    let upper: Vec<TailPoint> = multiples
        .iter()
        .map(|&t| {
            let x = t * scales.sigma;
            point(t, scales.sigma, s.iter().filter(|p| p.0 >= center_k1 + x).count())
        })
        .collect();
    let lower: Vec<TailPoint> = multiples
        .iter()
        .map(|&t| {
            let x = t * scales.l;
            point(t, scales.l, s.iter().filter(|p| p.1 <= center_l1 - x).count())
        })
        .collect();
    let violations = upper.iter().chain(&lower).filter(|p| p.violated).count();
    Ok(ConcentrationReport {
        config: *cfg,
        k,
        scales,
        center_k1,
        center_l1,
        upper,
        lower,
        violations,
        informational: cfg.model != SampleModel::Gaussian,
    })
}

/// Mean of a chi variable with `m` degrees of freedom scaled by
/// `1/sqrt(m)`: `sqrt(2/m) Gamma((m+1)/2) / Gamma(m/2)`.
pub fn chi_mean(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be >= 1".into()));
    }
    let m = m as f64;
    Ok((2.0 / m).sqrt() * (ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSupBound {
    /// `sqrt(2 log |T|) + sqrt(m)`.
    pub sqrt_form: f64,
    /// `sqrt(2 log |T|) + sqrt(2) Gamma((m+1)/2) / Gamma(m/2)`.
    pub gamma_form: f64,
    pub value: f64,
}

/// Bound on the expected maximum of `|T|` chi variables with `m` degrees of
/// freedom, given `log |T|`.
pub fn chi_sup_bound(ln_card: f64, m: usize) -> Result<ChiSupBound> {
    if !(ln_card >= 0.0) {
        return Err(Error::InvalidArgument(format!("log |T| = {ln_card} must be >= 0")));
    }
    let head = (2.0 * ln_card).sqrt();
    let sqrt_form = head + (m as f64).sqrt();
    let gamma_form = head + (m as f64).sqrt() * chi_mean(m)?;
    Ok(ChiSupBound {
        sqrt_form,
        gamma_form,
        value: sqrt_form.min(gamma_form),
    })
}

/// Tails `(exp(-m x^2 / 2n), exp(-m x^2 / 2k))` of the row-norm sum and of
/// `sigma_k` for Gaussian `F` with `N(0, 1/m)` entries.
pub fn appendix_tails(n: usize, m: usize, k: usize, x: f64) -> Result<(f64, f64)> {
    if n == 0 || m == 0 || k == 0 || !(x >= 0.0) {
        return Err(Error::InvalidArgument("appendix tails need positive n, m, k and x >= 0".into()));
    }
    let mx2 = m as f64 * x * x;
    Ok(((-mx2 / (2.0 * n as f64)).exp(), (-mx2 / (2.0 * k as f64)).exp()))
}

/// `n x m` matrix with i.i.d. `N(0, 1/m)` entries drawn from substream
/// `stream`, filled row by row.
pub fn gaussian_ensemble(n: usize, m: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut normals = NormalSampler::new();
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = vec![0.0; n * m];
    normals.fill(&mut rng, &mut data);
    DMatrix::from_row_slice(n, m, &data) * scale
}

/// Quick certified bounds for one matrix `F`.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleTrial {
    pub trial: usize,
    pub sum_row_norms: f64,
    /// `sqrt(k lambda_max(F F^T))`.
    pub sigma_spectral: f64,
    /// Sum of the `k` largest row norms.
    pub sigma_rows: f64,
    pub sigma_upper: f64,
    /// Largest row norm (`sigma_1 <= sigma_k`).
    pub sigma_lower: f64,
    /// `sqrt(n lambda_max(F F^T))`.
    pub l_spectral: f64,
    /// Square root of the certified MaxCut relaxation bound, when run.
    pub l_sdp: Option<f64>,
    pub l_upper: f64,
    /// `||F^T v||_2` for `v` the sign pattern of the top eigenvector.
    pub l_lower: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub maxcut: bool,
    pub per_trial: Vec<EnsembleTrial>,
    pub mean_sum_row_norms: f64,
    pub mean_row_norm: f64,
    /// `chi_mean(m)`, the predicted mean row norm.
    pub predicted_row_norm: f64,
    pub row_norm_rel_error: f64,
    pub mean_sigma_upper: f64,
    pub mean_l_upper: f64,
}

/// Bounds on one matrix `F` (rows `F_i`).
pub fn ensemble_trial(
    f: &DMatrix<f64>,
    k: usize,
    trial: usize,
    maxcut: Option<&SdpOptions>,
) -> Result<EnsembleTrial> {
    let n = f.nrows();
    check_k(k, n)?;
    let gram = f * f.transpose();
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = sym_eig(&gram)?;
    let lmax = eig.max_value().max(0.0);
    let mut norms: Vec<f64> = f.row_iter().map(|r| r.norm()).collect();
    let sum_row_norms: f64 = norms.iter().sum();
    let sigma_lower = norms.iter().copied().fold(0.0, f64::max);
    let sigma_rows = top_k_sum(&mut norms, k);
    let sigma_spectral = (k as f64 * lmax).sqrt();
    let l_spectral = (n as f64 * lmax).sqrt();
    let l_sdp = maxcut
        .map(|opts| maxcut_upper(&gram, opts).map(|r| r.upper_sdp.max(0.0).sqrt()))
        .transpose()?;
    let l_upper = [Some(l_spectral), Some(sum_row_norms), l_sdp]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    let top = eig.vectors.column(eig.vectors.ncols() - 1);
    let v = DVector::from_iterator(n, top.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }));
    let l_lower = (f.transpose() * v).norm();
    Ok(EnsembleTrial {
        trial,
        sum_row_norms,
        sigma_spectral,
        sigma_rows,
        sigma_upper: sigma_spectral.min(sigma_rows).min(l_upper),
        sigma_lower,
        l_spectral,
        l_sdp,
        l_upper,
        l_lower,
    })
}

/// Draws `trials` matrices `F` (`n x m`, `N(0, 1/m)` entries; trial `t`
/// uses substream `t`) and reports their row-norm sums and quick bounds
/// on `sigma_k` and `L`, optionally refining `L` with the MaxCut relaxation.
pub fn gaussian_ensemble_report(
    n: usize,
    m: usize,
    k: usize,
    trials: usize,
    seed: u64,
    maxcut: Option<&SdpOptions>,
) -> Result<EnsembleReport> {
    if n == 0 || m == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n, m and trials must be positive".into()));
    }
    check_k(k, n)?;
    let per_trial: Vec<EnsembleTrial> = (0..trials)
        .into_par_iter()
        .map(|t| ensemble_trial(&gaussian_ensemble(n, m, seed, t as u64), k, t, maxcut))
        .collect::<Result<_>>()?;
    let tf = trials as f64;
    let mean_sum_row_norms = per_trial.iter().map(|t| t.sum_row_norms).sum::<f64>() / tf;
    let mean_row_norm = mean_sum_row_norms / n as f64;
    let predicted_row_norm = chi_mean(m)?;
    Ok(EnsembleReport {
        n,
        m,
        k,
        trials,
        seed,
        maxcut: maxcut.is_some(),
        mean_sigma_upper: per_trial.iter().map(|t| t.sigma_upper).sum::<f64>() / tf,
        mean_l_upper: per_trial.iter().map(|t| t.l_upper).sum::<f64>() / tf,
        per_trial,
        mean_sum_row_norms,
        mean_row_norm,
        predicted_row_norm,
        row_norm_rel_error: (mean_row_norm - predicted_row_norm).abs() / predicted_row_norm,
    })
}
