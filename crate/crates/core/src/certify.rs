//! Weak recovery conditions and the closed-form bounds they are built from.
//!
//! A nullspace `F` (columns orthonormal, `n` rows) satisfies the
//! probabilistic nullspace property at level `alpha` when
//! `||Fy||_{k,1} <= alpha ||Fy||_1` for most `y`. The certificates here
//! compare an upper bound on the left side (from `sigma_k`) with a lower
//! bound on the right side (from the row norms and `L`), each widened by
//! `beta` standard deviations of its concentration inequality.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_k, Error, Result};

/// `log C(n, k)` through log-gamma, finite for any `n`.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `log(2^k C(n, k))`: log of the number of sign patterns with support `k`.
pub fn ln_support_count(n: usize, k: usize) -> f64 {
    k as f64 * std::f64::consts::LN_2 + ln_choose(n, k)
}

/// The three ways the logarithmic width factor in front of `sigma_k` is
/// written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogForm {
    /// `sqrt(2k (1 + log(2n/k)))`.
    #[default]
    Standard,
    /// `sqrt(2k log(1 + 2n/k))`.
    Shifted,
    /// `sqrt(2k log(2n/k))`.
    Plain,
}

impl LogForm {
    pub fn factor(self, n: usize, k: usize) -> f64 {
        let (n, k) = (n as f64, k as f64);
        let inner = match self {
            LogForm::Standard => 1.0 + (2.0 * n / k).ln(),
            LogForm::Shifted => (1.0 + 2.0 * n / k).ln(),
            LogForm::Plain => (2.0 * n / k).ln(),
        };
        (2.0 * k * inner).sqrt()
    }

    pub fn name(self) -> &'static str {
        match self {
            LogForm::Standard => "standard",
            LogForm::Shifted => "shifted",
            LogForm::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [LogForm::Standard, LogForm::Shifted, LogForm::Plain]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

/// Upper bounds on `E ||Fy||_{k,1}` for `y ~ N(0, I)`:
/// `sigma sqrt(2 log(2^k C(n,k)))` and the relaxed
/// `sigma sqrt(2k (1 + log(2n/k)))`.
pub fn expected_k1_bound(sigma_k: f64, n: usize, k: usize) -> Result<(f64, f64)> {
    check_k(k, n)?;
    if !(sigma_k >= 0.0) || !sigma_k.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma_k = {sigma_k} must be nonnegative")));
    }
    let tight = sigma_k * (2.0 * ln_support_count(n, k)).sqrt();
    let relaxed = sigma_k * LogForm::Standard.factor(n, k);
    Ok((tight, relaxed))
}

/// `E ||Fy||_1 = sqrt(2/pi) sum_i ||F_i||_2` for `y ~ N(0, I)`.
pub fn expected_l1(row_norms: &[f64]) -> f64 {
    FRAC_2_PI.sqrt() * row_norms.iter().sum::<f64>()
}

/// Gaussian concentration tails at deviation `x` for Lipschitz constant
/// `scale`: `(exp(-x^2 / 2 scale^2), 2 (1 - Phi(x / scale)))`.
pub fn tail_bounds(x: f64, scale: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tail bounds need x >= 0 and scale > 0, got x = {x}, scale = {scale}"
        )));
    }
    let t = x / scale;
    let exponential = (-0.5 * t * t).exp();
    let normal = erfc(t / std::f64::consts::SQRT_2).min(1.0);
    Ok((exponential, normal))
}

/// `sigma sqrt(pi log |V|)`, the bound on the expected maximum of a
/// sub-Gaussian process over a finite set `V` (given as `log |V|`).
pub fn majorization_bound(sigma: f64, ln_card: f64) -> Result<f64> {
    if !(ln_card >= 0.0) {
        return Err(Error::InvalidArgument(format!("log |V| = {ln_card} must be >= 0")));
    }
    Ok(sigma * (PI * ln_card).sqrt())
}

/// Samples needed to estimate an expectation of a variable with range `D`
/// to accuracy `epsilon` with failure probability `beta` (Hoeffding):
/// `ceil(D^2 log(2/beta) / (2 epsilon^2))`, at least 1.
pub fn hoeffding_samples(range: f64, epsilon: f64, beta: f64) -> Result<u64> {
    if !(range > 0.0) || !(epsilon > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Hoeffding sample count needs positive D, epsilon and beta, got {range}, {epsilon}, {beta}"
        )));
    }
    let n = range * range * (2.0 / beta).ln() / (2.0 * epsilon * epsilon);
    if !n.is_finite() {
        return Err(Error::InvalidArgument("sample count overflows".into()));
    }
    Ok((n.ceil() as u64).max(1))
}

/// `2 / (1 - 2 alpha)`: the factor relating the decoding error to the best
/// `k`-term approximation error.
pub fn error_amplification(alpha: f64) -> Result<f64> {
    if !(alpha < 0.5) || !alpha.is_finite() {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(2.0 / (1.0 - 2.0 * alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RipBounds {
    /// `sigma_k <= sqrt(k (1 + delta_k))`.
    pub sigma_upper: f64,
    /// `||F_i||_2 >= sqrt(1 - delta_1)`.
    pub row_norm_lower: f64,
    /// `L <= (n / k) sigma_upper`.
    pub l_upper: f64,
}

/// Bounds implied by restricted isometry constants of `F`.
pub fn rip_implied(delta_k: f64, delta_1: f64, k: usize, n: usize) -> Result<RipBounds> {
    check_k(k, n)?;
    for d in [delta_k, delta_1] {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::InvalidArgument(format!("RIP constant {d} outside (0, 1]")));
        }
    }
    let sigma_upper = (k as f64 * (1.0 + delta_k)).sqrt();
    Ok(RipBounds {
        sigma_upper,
        row_norm_lower: (1.0 - delta_1).sqrt(),
        l_upper: n as f64 / k as f64 * sigma_upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian,
    /// Independent coordinates bounded by `delta`, with concentration
    /// constant `c`.
    Bounded { delta: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryParams {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub model: NoiseModel,
    pub log_form: LogForm,
}

impl RecoveryParams {
    pub fn gaussian(n: usize, k: usize, alpha: f64, beta: f64) -> Self {
        Self {
            n,
            k,
            alpha,
            beta,
            model: NoiseModel::Gaussian,
            log_form: LogForm::Standard,
        }
    }

    pub fn bounded(n: usize, k: usize, alpha: f64, beta: f64, delta: f64, c: f64) -> Self {
        Self {
            model: NoiseModel::Bounded { delta, c },
            ..Self::gaussian(n, k, alpha, beta)
        }
    }

    pub fn with_log_form(mut self, form: LogForm) -> Self {
        self.log_form = form;
        self
    }

    fn validate(&self) -> Result<()> {
        check_k(self.k, self.n)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha_k = {} outside (0, 1)", self.alpha)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta = {} must be >= 0", self.beta)));
        }
        if let NoiseModel::Bounded { delta, c } = self.model {
            if !(delta > 0.0) || !(c > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "bounded model needs delta > 0 and c > 0, got {delta}, {c}"
                )));
            }
        }
        Ok(())
    }

    /// Probability with which both concentration events hold at width `beta`.
    pub fn probability(&self, beta: f64) -> f64 {
        if beta < 0.0 {
            return 0.0;
        }
        let p = match self.model {
            NoiseModel::Gaussian => 1.0 - 2.0 * (-0.5 * beta * beta).exp(),
            NoiseModel::Bounded { delta, c } => {
                1.0 - 2.0 * c * (-beta * beta / (c * delta * delta)).exp()
            }
        };
        p.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryCertificate {
    /// Upper bound on `||Fy||_{k,1}` at width `beta`.
    pub lhs: f64,
    /// `alpha` times the lower bound on `||Fy||_1` at width `beta`.
    pub rhs: f64,
    /// Largest width at which the condition still holds.
    pub beta_star: f64,
    /// Probability of the condition at the requested `beta` (zero when not
    /// certified).
    pub probability: f64,
    /// Probability at `beta_star` (zero when `beta_star < 0`).
    pub best_probability: f64,
    pub certified: bool,
    pub params: RecoveryParams,
    pub sigma_hat: f64,
    pub l_hat: f64,
    /// Expectation bounds used on each side.
    pub expected_k1: f64,
    pub expected_l1: f64,
    /// `sum_i ||F_i||_2` when the Gaussian closed form was used.
    pub sum_row_norms: Option<f64>,
}

fn check_bound(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and >= 0")));
    }
    Ok(())
}

fn certificate(
    expected_k1: f64,
    expected_l1: f64,
    sigma_hat: f64,
    l_hat: f64,
    sum_row_norms: Option<f64>,
    params: RecoveryParams,
) -> RecoveryCertificate {
    let (a, b) = (params.alpha, params.beta);
    let lhs = expected_k1 + b * sigma_hat;
    let rhs = (expected_l1 - b * l_hat) * a;
    let margin = a * expected_l1 - expected_k1;
    let slope = sigma_hat + a * l_hat;
    let beta_star = if slope > 0.0 {
        margin / slope
    } else if margin >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let certified = lhs <= rhs;
    RecoveryCertificate {
        lhs,
        rhs,
        beta_star,
        probability: if certified { params.probability(b) } else { 0.0 },
        best_probability: params.probability(beta_star),
        certified,
        params,
        sigma_hat,
        l_hat,
        expected_k1,
        expected_l1,
        sum_row_norms,
    }
}

/// Gaussian-model certificate:
/// `(w + beta) sigma_hat <= (sqrt(2/pi) sum ||F_i|| - beta L_hat) alpha`,
/// with `w` the log-width factor selected by `params.log_form`.
pub fn certify_gaussian(
    sigma_hat: f64,
    l_hat: f64,
    sum_row_norms: f64,
    params: &RecoveryParams,
) -> Result<RecoveryCertificate> {
    params.validate()?;
    check_bound("sigma_hat", sigma_hat)?;
    check_bound("L_hat", l_hat)?;
    check_bound("sum of row norms", sum_row_norms)?;
    let mut params = *params;
    params.model = NoiseModel::Gaussian;
    let e_k1 = params.log_form.factor(params.n, params.k) * sigma_hat;
    let e_l1 = FRAC_2_PI.sqrt() * sum_row_norms;
    Ok(certificate(e_k1, e_l1, sigma_hat, l_hat, Some(sum_row_norms), params))
}

/// Bounded-model certificate from supplied expectations:
/// `E_k1 + beta sigma_hat <= (E_l1 - beta L_hat) alpha`.
pub fn certify_bounded(
    expected_k1: f64,
    expected_l1: f64,
    sigma_hat: f64,
    l_hat: f64,
    params: &RecoveryParams,
) -> Result<RecoveryCertificate> {
    params.validate()?;
    if !matches!(params.model, NoiseModel::Bounded { .. }) {
        return Err(Error::InvalidArgument("bounded certificate needs a bounded model".into()));
    }
    check_bound("E_k1", expected_k1)?;
    check_bound("E_l1", expected_l1)?;
    check_bound("sigma_hat", sigma_hat)?;
    check_bound("L_hat", l_hat)?;
    Ok(certificate(expected_k1, expected_l1, sigma_hat, l_hat, None, *params))
}

/// The condition with `sigma_hat = sqrt(sdpk_value)` and the plain log
/// factor: `(sqrt(2k log(2n/k)) + beta) sqrt(SDP_k) <=
/// (sqrt(2/pi) sum ||F_i|| - beta L_hat) alpha`.
pub fn tightness_condition(
    sdpk_value: f64,
    sum_row_norms: f64,
    l_hat: f64,
    alpha: f64,
    beta: f64,
    n: usize,
    k: usize,
) -> Result<bool> {
    check_k(k, n)?;
    for v in [sdpk_value, sum_row_norms, l_hat, alpha, beta] {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    let lhs = (LogForm::Plain.factor(n, k) + beta) * sdpk_value.max(0.0).sqrt();
    let rhs = (FRAC_2_PI.sqrt() * sum_row_norms - beta * l_hat) * alpha;
    Ok(lhs <= rhs)
}

#[cfg(test)]
mod tests;
