//! Experiment drivers: projected decoding residuals, growth of the bounds
//! with dimension, empirical versus certified recovery, and the end-to-end
//! certification of a user matrix.
//!
//! All randomness comes from the run seed: the design matrix uses substream
//! [`MATRIX_STREAM`], the projection direction [`DIRECTION_STREAM`], and
//! trial `t` uses substream `t`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{certify_bounded, certify_gaussian, LogForm, RecoveryCertificate, RecoveryParams};
use crate::error::{check_k, Error, Result};
use crate::kdense::{sigma_bounds, SigmaBoundReport, SigmaMethod, SigmaOptions};
use crate::linalg::{nullspace_basis, CodingMatrix, NullspaceBasis};
use crate::maxcut::{l_bounds, LBoundOptions, LBoundReport};
use crate::recovery::{
    check_error_bound, default_success_tol, recovery_trial, BpOptions, RecoveryTrial,
};
use crate::rng::{stream_rng, NormalSampler};
use crate::sampling::{empirical_norm_stats, gaussian_ensemble, ensemble_trial, McConfig, McStats, SampleModel};
use crate::sdp::SdpOptions;

pub const MATRIX_STREAM: u64 = 1 << 40;
pub const DIRECTION_STREAM: u64 = (1 << 40) + 1;

/// `rows x cols` matrix with i.i.d. standard normal entries, row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut normals = NormalSampler::new();
    let mut data = vec![0.0; rows * cols];
    normals.fill(&mut rng, &mut data);
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Uniformly distributed unit vector.
pub fn random_direction(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let v = DVector::from_column_slice(gaussian_matrix(n, 1, seed, stream).as_slice());
    let v = &v / v.norm();
    v.iter().copied().collect()
}

/// A random ordering of the coordinates and i.i.d. uniform `[-1, 1]`
/// values; the `k`-sparse signal keeps the first `k` positions.
#[derive(Debug, Clone)]
pub struct NestedSignal {
    order: Vec<usize>,
    values: Vec<f64>,
}

impl NestedSignal {
    pub fn draw(n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let values = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        Self { order, values }
    }

    pub fn signal(&self, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.order.len()];
        for (p, &i) in self.order.iter().take(k).enumerate() {
            e[i] = self.values[p];
        }
        e
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualConfig {
    pub n: usize,
    /// Number of measurements (rows of `A`).
    pub q: usize,
    pub nonzeros: usize,
    pub trials: usize,
    pub seed: u64,
    pub bins: usize,
    pub decoder: BpOptions,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            n: 100,
            q: 30,
            nonzeros: 15,
            trials: 1000,
            seed: 0,
            bins: 30,
            decoder: BpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub success: bool,
    pub eta_l1: f64,
    pub nsp_ratio: Option<f64>,
    pub projected_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub config: ResidualConfig,
    pub rows: Vec<TrialRow>,
    pub mean: f64,
    pub stderr: f64,
    pub successes: usize,
    pub histogram: Vec<HistogramBin>,
    #[serde(skip)]
    pub trials: Vec<RecoveryTrial>,
}

/// CSV header shared by every per-trial table.
pub const TRIAL_CSV_HEADER: &str = "trial,seed,k,success,eta_l1,nsp_ratio,projected_residual";

pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut s = format!("{TRIAL_CSV_HEADER}\n");
    for r in rows {
        let ratio = r.nsp_ratio.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.trial, r.seed, r.k, r.success, r.eta_l1, ratio, r.projected_residual
        );
    }
    s
}

impl ResidualReport {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        for b in &self.histogram {
            let _ = writeln!(s, "{},{},{}", b.lo, b.hi, b.count);
        }
        s
    }

    /// Error-bound checks at `alpha = ratio` for every trial whose own
    /// ratio is at most `max_alpha`; returns `(applicable, violations)`.
    pub fn error_bound_violations(&self, max_alpha: f64) -> Result<(usize, usize)> {
        let k = self.config.nonzeros;
        let (mut applicable, mut violations) = (0, 0);
        for t in &self.trials {
            let alpha = match t.nsp_ratio {
                Some(r) if r <= max_alpha => r,
                Some(_) => continue,
                None => 0.0,
            };
            let c = check_error_bound(t, k, alpha)?;
            if c.applicable {
                applicable += 1;
                if !c.holds {
                    violations += 1;
                }
            }
        }
        Ok((applicable, violations))
    }
}

fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

/// Decodes `trials` random sparse signals through one fixed Gaussian `A`
/// and records `v^T (x_lp - e)` along one fixed random direction `v`.
pub fn fig1_residuals(cfg: &ResidualConfig) -> Result<ResidualReport> {
    if cfg.trials == 0 || cfg.q == 0 || cfg.q > cfg.n {
        return Err(Error::InvalidArgument("need trials >= 1 and 0 < q <= n".into()));
    }
    check_k(cfg.nonzeros, cfg.n)?;
    let a = gaussian_matrix(cfg.q, cfg.n, cfg.seed, MATRIX_STREAM);
    let v = random_direction(cfg.n, cfg.seed, DIRECTION_STREAM);
    let trials: Vec<RecoveryTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let e = NestedSignal::draw(cfg.n, cfg.seed, t as u64).signal(cfg.nonzeros);
            recovery_trial(&a, &e, cfg.nonzeros, default_success_tol(&e), &cfg.decoder)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<TrialRow> = trials
        .iter()
        .enumerate()
        .map(|(t, tr)| TrialRow {
            trial: t,
            seed: cfg.seed,
            k: cfg.nonzeros,
            success: tr.success,
            eta_l1: tr.eta_l1,
            nsp_ratio: tr.nsp_ratio,
            projected_residual: tr.eta.iter().zip(&v).map(|(a, b)| a * b).sum(),
        })
        .collect();
    let proj: Vec<f64> = rows.iter().map(|r| r.projected_residual).collect();
    let stats = McStats::from_values(&proj);
    Ok(ResidualReport {
        config: cfg.clone(),
        mean: stats.mean,
        stderr: stats.stderr,
        successes: rows.iter().filter(|r| r.success).count(),
        histogram: histogram(&proj, cfg.bins),
        rows,
        trials,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingConfig {
    pub n_grid: Vec<usize>,
    /// `m = round(m_ratio * n)`.
    pub m_ratio: f64,
    /// `k = ceil(k_fraction * n)`.
    pub k_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    /// Refine `L` with the MaxCut relaxation.
    pub maxcut: bool,
    pub sdp: SdpOptions,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![50, 100, 200, 400],
            m_ratio: 0.5,
            k_fraction: 0.05,
            trials: 1,
            seed: 0,
            maxcut: true,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sum_row_norms: f64,
    pub l_upper: f64,
    pub l_lower: f64,
    pub sigma_upper: f64,
    pub sigma_lower: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub config: ScalingConfig,
    pub rows: Vec<ScalingRow>,
    pub slope_row_norms: f64,
    pub slope_l: f64,
    pub slope_sigma: f64,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,m,k,sum_row_norms,l_upper,l_lower,sigma_upper,sigma_lower\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.n, r.m, r.k, r.sum_row_norms, r.l_upper, r.l_lower, r.sigma_upper, r.sigma_lower
            );
        }
        s
    }
}

/// Mean row-norm sum and mean bounds on `L` and `sigma_k` for Gaussian
/// `n x m` matrices `F` over a grid of `n`. Matrix `t` at size `n` uses
/// substream `t` of seed `seed + n`.
pub fn scaling(cfg: &ScalingConfig) -> Result<ScalingReport> {
    if cfg.trials == 0 || cfg.n_grid.len() < 2 {
        return Err(Error::InvalidArgument("scaling needs trials >= 1 and two grid points".into()));
    }
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let m = ((cfg.m_ratio * n as f64).round() as usize).max(1);
        let k = ((cfg.k_fraction * n as f64).ceil() as usize).clamp(1, n);
        let maxcut = cfg.maxcut.then_some(&cfg.sdp);
        let seed = cfg.seed.wrapping_add(n as u64);
        let per: Vec<_> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| ensemble_trial(&gaussian_ensemble(n, m, seed, t as u64), k, t, maxcut))
            .collect::<Result<_>>()?;
        let mean = |f: &dyn Fn(&crate::sampling::EnsembleTrial) -> f64| {
            per.iter().map(f).sum::<f64>() / per.len() as f64
        };
        rows.push(ScalingRow {
            n,
            m,
            k,
            sum_row_norms: mean(&|t| t.sum_row_norms),
            l_upper: mean(&|t| t.l_upper),
            l_lower: mean(&|t| t.l_lower),
            sigma_upper: mean(&|t| t.sigma_upper),
            sigma_lower: mean(&|t| t.sigma_lower),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let col = |f: fn(&ScalingRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(ScalingReport {
        slope_row_norms: loglog_slope(&ns, &col(|r| r.sum_row_norms))?,
        slope_l: loglog_slope(&ns, &col(|r| r.l_upper))?,
        slope_sigma: loglog_slope(&ns, &col(|r| r.sigma_upper))?,
        config: cfg.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveConfig {
    pub n: usize,
    /// Nullspace dimension; `A` has `n - m` rows.
    pub m: usize,
    pub k_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub alpha: f64,
    pub log_form: LogForm,
    /// Relaxations used for `sigma_k` in addition to the quick bounds.
    pub methods: Vec<SigmaMethod>,
    pub samples: usize,
    pub sdp: SdpOptions,
    pub decoder: BpOptions,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m: 50,
            k_max: 25,
            trials: 100,
            seed: 0,
            alpha: 0.49,
            log_form: LogForm::Standard,
            methods: Vec::new(),
            samples: 1000,
            sdp: SdpOptions::default(),
            decoder: BpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub k: usize,
    pub k_over_m: f64,
    pub empirical: f64,
    pub predicted: f64,
    pub beta_star: f64,
    pub sigma_upper: f64,
    pub sigma_method: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveReport {
    pub config: CurveConfig,
    pub sum_row_norms: f64,
    pub l_upper: f64,
    pub rows: Vec<CurveRow>,
}

impl CurveReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,k_over_m,empirical,predicted,beta_star,sigma_upper\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.k, r.k_over_m, r.empirical, r.predicted, r.beta_star, r.sigma_upper
            );
        }
        s
    }
}

/// Empirical recovery frequency of `k`-sparse signals through one fixed
/// Gaussian `A` (`(n - m) x n`) against the probability certified from
/// bounds on its nullspace. Trial `t` draws one coordinate ordering and set
/// of values and reuses them for every `k`, so the signals are nested in `k`.
pub fn recovery_curve(cfg: &CurveConfig) -> Result<CurveReport> {
    if cfg.m == 0 || cfg.m >= cfg.n || cfg.trials == 0 {
        return Err(Error::InvalidArgument("need 0 < m < n and trials >= 1".into()));
    }
    check_k(cfg.k_max, cfg.m)?;
    let a = gaussian_matrix(cfg.n - cfg.m, cfg.n, cfg.seed, MATRIX_STREAM);
    let f = nullspace_basis(&CodingMatrix::new(a.clone())?)?;
    let gram = f.gram();
    let l = l_bounds(
        gram,
        &LBoundOptions {
            samples: cfg.samples,
            seed: cfg.seed,
            exact_limit: 0,
            sdp: cfg.sdp,
        },
    )?;
    let l_upper = l.l_upper();
    let sum_row_norms = f.sum_row_norms();
    let sigma_opts = SigmaOptions {
        methods: cfg.methods.clone(),
        sdp: cfg.sdp,
        samples: cfg.samples,
        seed: cfg.seed,
        ..SigmaOptions::default()
    };

    let outcomes: Vec<Vec<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let sig = NestedSignal::draw(cfg.n, cfg.seed, t as u64);
            (1..=cfg.k_max)
                .map(|k| {
                    let e = sig.signal(k);
                    recovery_trial(&a, &e, k, default_success_tol(&e), &cfg.decoder).map(|r| r.success)
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.k_max);
    for k in 1..=cfg.k_max {
        let sigma = sigma_bounds(gram, k, &sigma_opts)?;
        let (sigma_hat, method) = if l_upper < sigma.sigma_upper() {
            (l_upper, "maxcut".to_string())
        } else {
            (sigma.sigma_upper(), sigma.upper_method.clone())
        };
        let params = RecoveryParams::gaussian(cfg.n, k, cfg.alpha, 0.0).with_log_form(cfg.log_form);
        let cert = certify_gaussian(sigma_hat, l_upper, sum_row_norms, &params)?;
        let wins = outcomes.iter().filter(|o| o[k - 1]).count();
        rows.push(CurveRow {
            k,
            k_over_m: k as f64 / cfg.m as f64,
            empirical: wins as f64 / cfg.trials as f64,
            predicted: cert.best_probability,
            beta_star: cert.beta_star,
            sigma_upper: sigma_hat,
            sigma_method: method,
        });
    }
    Ok(CurveReport {
        config: cfg.clone(),
        sum_row_norms,
        l_upper,
        rows,
    })
}

/// How the input matrix is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// A coding matrix `A`; its nullspace basis is computed.
    Coding,
    /// A nullspace basis `F` used as given.
    Nullspace,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyConfig {
    pub kind: MatrixKind,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub methods: Vec<SigmaMethod>,
    /// Rounding samples for the lower bounds.
    pub samples: usize,
    pub seed: u64,
    pub model: SampleModel,
    /// Concentration constant for bounded models.
    pub c: f64,
    /// Monte-Carlo draws for the bounded-model expectations.
    pub mc_samples: usize,
    pub log_form: LogForm,
    pub sdp: SdpOptions,
}

impl CertifyConfig {
    pub fn new(kind: MatrixKind, k: usize) -> Self {
        Self {
            kind,
            k,
            alpha: 0.49,
            beta: 0.0,
            methods: SigmaOptions::default().methods,
            samples: 1000,
            seed: 0,
            model: SampleModel::Gaussian,
            c: 1.0,
            mc_samples: 100_000,
            log_form: LogForm::Standard,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub config: CertifyConfig,
    pub n: usize,
    pub m: usize,
    pub sum_row_norms: f64,
    pub sigma: SigmaBoundReport,
    pub l: LBoundReport,
    pub sigma_hat: f64,
    pub sigma_hat_method: String,
    pub l_hat: f64,
    /// Empirical `(E ||Fy||_{k,1}, E ||Fy||_1)` under a bounded model.
    pub expectations: Option<(McStats, McStats)>,
    pub certificate: RecoveryCertificate,
}

/// Nullspace basis for `matrix` interpreted according to `kind`.
pub fn basis_for(matrix: DMatrix<f64>, kind: MatrixKind) -> Result<NullspaceBasis> {
    match kind {
        MatrixKind::Coding => nullspace_basis(&CodingMatrix::new(matrix)?),
        MatrixKind::Nullspace => NullspaceBasis::from_raw(matrix),
    }
}

/// Bounds `sigma_k` and `L` for the nullspace of `matrix` and evaluates the
/// recovery certificate.
pub fn certify_matrix(matrix: DMatrix<f64>, cfg: &CertifyConfig) -> Result<CertifyReport> {
    let f = basis_for(matrix, cfg.kind)?;
    let n = f.n();
    check_k(cfg.k, n)?;
    let gram = f.gram();
    let sigma = sigma_bounds(
        gram,
        cfg.k,
        &SigmaOptions {
            methods: cfg.methods.clone(),
            sdp: cfg.sdp,
            samples: cfg.samples,
            seed: cfg.seed,
            ..SigmaOptions::default()
        },
    )?;
    let l = l_bounds(
        gram,
        &LBoundOptions {
            samples: cfg.samples.max(1),
            seed: cfg.seed,
            sdp: cfg.sdp,
            ..LBoundOptions::default()
        },
    )?;
    let l_hat = match l.exact {
        Some(e) => l.l_upper().min(e.max(0.0).sqrt()),
        None => l.l_upper(),
    };
    let (sigma_hat, sigma_hat_method) = if l_hat < sigma.sigma_upper() {
        (l_hat, "maxcut".to_string())
    } else {
        (sigma.sigma_upper(), sigma.upper_method.clone())
    };
    let sum_row_norms = f.sum_row_norms();
    let (certificate, expectations) = match cfg.model.delta() {
        None => {
            let params = RecoveryParams::gaussian(n, cfg.k, cfg.alpha, cfg.beta).with_log_form(cfg.log_form);
            (certify_gaussian(sigma_hat, l_hat, sum_row_norms, &params)?, None)
        }
        Some(delta) => {
            let mc = McConfig {
                samples: cfg.mc_samples,
                seed: cfg.seed,
                model: cfg.model,
            };
            let (k1, l1) = empirical_norm_stats(f.basis(), cfg.k, &mc)?;
            let params = RecoveryParams::bounded(n, cfg.k, cfg.alpha, cfg.beta, delta, cfg.c)
                .with_log_form(cfg.log_form);
            (
                certify_bounded(k1.mean, l1.mean, sigma_hat, l_hat, &params)?,
                Some((k1, l1)),
            )
        }
    };
    Ok(CertifyReport {
        config: cfg.clone(),
        n,
        m: f.m(),
        sum_row_norms,
        sigma,
        l,
        sigma_hat,
        sigma_hat_method,
        l_hat,
        expectations,
        certificate,
    })
}

#[cfg(test)]
mod tests;
