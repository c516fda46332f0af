//! Two-sided bounds on `sigma_k^2 = max v^T G v` over `v in {-1,0,1}^n`
//! with at most `k` nonzeros.
//!
//! Writing `v = u_+ - u_-` turns the problem into a k-dense-subgraph
//! instance `max u^T M u`, `u in {0,1}^{2n}`, `1^T u <= k`, with
//! `M = [[1, -1], [-1, 1]] (x) G`. Upper bounds come from four
//! semidefinite relaxations of that instance plus analytic bounds; lower
//! bounds from hybrid rounding and, on small instances, enumeration.

mod relax;
mod round;

use nalgebra::DMatrix;
use serde::Serialize;

pub use relax::{
    feige_upper, sdpk_upper, sqk2_plus_upper, sqk2_upper, sqk3_upper, RelaxationValue,
};
pub use round::{greedy_prune, hybrid_round_lower, prune_guarantee, subset_weight, HybridRounding};

use crate::error::{check_k, Error, Result};
use crate::linalg::{sym_eig, top_k_sum, NullspaceBasis};
use crate::maxcut::{self, check_gram, quad_form};
use crate::sdp::SdpOptions;

/// Largest `n` accepted by [`sigma_exact_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 14;

/// A weight matrix `M` with a cardinality budget `k`.
#[derive(Debug, Clone)]
pub struct KDenseInstance {
    weights: DMatrix<f64>,
    k: usize,
    gram: Option<DMatrix<f64>>,
}

impl KDenseInstance {
    /// Instance with an arbitrary PSD weight matrix.
    pub fn from_weights(weights: DMatrix<f64>, k: usize) -> Result<Self> {
        check_gram(&weights)?;
        check_k(k, weights.nrows())?;
        check_psd(&weights)?;
        Ok(Self {
            weights,
            k,
            gram: None,
        })
    }

    /// `M = [[G, -G], [-G, G]]` for a PSD Gram matrix `G`, `1 <= k <= n`.
    pub fn from_gram(gram: &DMatrix<f64>, k: usize) -> Result<Self> {
        check_gram(gram)?;
        let n = gram.nrows();
        check_k(k, n)?;
        check_psd(gram)?;
        let g = (gram + gram.transpose()) * 0.5;
        let weights = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let s = if (i < n) == (j < n) { 1.0 } else { -1.0 };
            s * g[(i % n, j % n)]
        });
        Ok(Self {
            weights,
            k,
            gram: Some(g),
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Order of `M`.
    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    /// The Gram matrix when the instance was built from one.
    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.gram.as_ref()
    }

    /// The same weights with a different budget.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        let limit = self.gram.as_ref().map_or(self.dim(), |g| g.nrows());
        check_k(k, limit)?;
        Ok(Self { k, ..self.clone() })
    }
}

fn check_psd(s: &DMatrix<f64>) -> Result<()> {
    let eig = sym_eig(s)?;
    let tol = 1e-9 * eig.max_value().abs().max(f64::MIN_POSITIVE);
    if eig.min_value() < -tol {
        return Err(Error::InvalidArgument(format!(
            "matrix is not PSD (smallest eigenvalue {:e})",
            eig.min_value()
        )));
    }
    Ok(())
}

/// The k-dense-subgraph instance of a nullspace basis.
pub fn build_instance(f: &NullspaceBasis, k: usize) -> Result<KDenseInstance> {
    KDenseInstance::from_gram(f.gram(), k)
}

/// Exact `sigma_k^2` and a maximizing `v`, by depth-first enumeration of
/// `v in {-1,0,1}^n` with at most `k` nonzeros and first nonzero `+1`.
pub fn sigma_exact_with_vector(gram: &DMatrix<f64>, k: usize) -> Result<(f64, Vec<i8>)> {
    check_gram(gram)?;
    let n = gram.nrows();
    check_k(k, n)?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    struct Search<'a> {
        g: &'a DMatrix<f64>,
        n: usize,
        k: usize,
        v: Vec<f64>,
        gv: Vec<f64>,
        best: f64,
        best_v: Vec<f64>,
    }
    impl Search<'_> {
        fn set(&mut self, i: usize, s: f64) {
            let col = self.g.column(i);
            for r in 0..self.n {
                self.gv[r] += s * col[r];
            }
            self.v[i] += s;
        }

        fn visit(&mut self, i: usize, used: usize, val: f64) {
            if val > self.best {
                self.best = val;
                self.best_v.copy_from_slice(&self.v);
            }
            if used == self.k {
                return;
            }
            for j in i..self.n {
                let signs: &[f64] = if used == 0 { &[1.0] } else { &[1.0, -1.0] };
                for &s in signs {
                    let next = val + 2.0 * s * self.gv[j] + self.g[(j, j)];
                    self.set(j, s);
                    self.visit(j + 1, used + 1, next);
                    self.set(j, -s);
                }
            }
        }
    }
    let mut search = Search {
        g: gram,
        n,
        k,
        v: vec![0.0; n],
        gv: vec![0.0; n],
        best: 0.0,
        best_v: vec![0.0; n],
    };
    search.visit(0, 0, 0.0);
    let value = quad_form(gram, &search.best_v);
    Ok((value, search.best_v.iter().map(|&x| x as i8).collect()))
}

/// Exact `sigma_k^2` for `n <= 14`.
pub fn sigma_exact_bruteforce(gram: &DMatrix<f64>, k: usize) -> Result<f64> {
    Ok(sigma_exact_with_vector(gram, k)?.0)
}

/// `mu(n, k) = (1 - 2 / k^{1/3}) / (1 - (2 pi n^2 / k^2) exp(-n^{1/9} / 3))`,
/// defined for `k >= n^{1/3}` and a positive denominator.
pub fn approx_ratio_mu(n: f64, k: f64) -> Result<f64> {
    if !(n >= 1.0 && k >= 1.0) || !n.is_finite() {
        return Err(Error::OutOfRegime(format!("n = {n}, k = {k}")));
    }
    if k < n.cbrt() {
        return Err(Error::OutOfRegime(format!(
            "k = {k} is below n^(1/3) = {}",
            n.cbrt()
        )));
    }
    let denom = if k.is_infinite() {
        1.0
    } else {
        1.0 - 2.0 * std::f64::consts::PI * n * n / (k * k) * (-n.powf(1.0 / 9.0) / 3.0).exp()
    };
    if !(denom > 0.0) {
        return Err(Error::OutOfRegime(format!(
            "denominator {denom} is not positive at n = {n}, k = {k}"
        )));
    }
    Ok((1.0 - 2.0 / k.cbrt()) / denom)
}

/// The two terms of the rounding guarantee
/// `(k/N) mu(N, k) ((1/4) Tr(M G') + SDP_k / (2 pi))`, where
/// `G'_ij = sqrt(X_ii X_jj)`.
#[derive(Debug, Clone, Serialize)]
pub struct RoundingGuarantee {
    pub mu: Option<f64>,
    pub with_trace_term: Option<f64>,
    pub without_trace_term: Option<f64>,
}

pub fn rounding_guarantee(
    inst: &KDenseInstance,
    x: &DMatrix<f64>,
    sdpk_value: f64,
) -> RoundingGuarantee {
    let n = inst.dim();
    let k = inst.k() as f64;
    let mu = approx_ratio_mu(n as f64, k).ok();
    let roots: Vec<f64> = (0..n).map(|i| x[(i, i)].max(0.0).sqrt()).collect();
    let tr_mg = quad_form(inst.weights(), &roots);
    let scale = mu.map(|mu| k / n as f64 * mu);
    RoundingGuarantee {
        mu,
        with_trace_term: scale
            .map(|s| s * (0.25 * tr_mg + sdpk_value / (2.0 * std::f64::consts::PI))),
        without_trace_term: scale.map(|s| s * sdpk_value / (2.0 * std::f64::consts::PI)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    Sqk2,
    Sqk2Plus,
    Sqk3,
    Feige,
    Sdpk,
    Exact,
    /// The `L^2` bound from the MaxCut relaxation, valid for every `k`.
    Maxcut,
}

impl SigmaMethod {
    pub const ALL: [SigmaMethod; 7] = [
        SigmaMethod::Sqk2,
        SigmaMethod::Sqk2Plus,
        SigmaMethod::Sqk3,
        SigmaMethod::Feige,
        SigmaMethod::Sdpk,
        SigmaMethod::Exact,
        SigmaMethod::Maxcut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SigmaMethod::Sqk2 => "sqk2",
            SigmaMethod::Sqk2Plus => "sqk2+",
            SigmaMethod::Sqk3 => "sqk3",
            SigmaMethod::Feige => "feige",
            SigmaMethod::Sdpk => "sdpk",
            SigmaMethod::Exact => "exact",
            SigmaMethod::Maxcut => "maxcut",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SigmaOptions {
    pub methods: Vec<SigmaMethod>,
    pub sdp: SdpOptions,
    pub samples: usize,
    pub seed: u64,
    pub max_added: usize,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self {
            methods: vec![
                SigmaMethod::Sqk2,
                SigmaMethod::Sqk3,
                SigmaMethod::Feige,
                SigmaMethod::Sdpk,
            ],
            sdp: SdpOptions::default(),
            samples: 1000,
            seed: 0,
            max_added: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuickBounds {
    /// `k * lambda_max(G)`.
    pub spectral: f64,
    /// `(sum of the k largest ||F_i||)^2`.
    pub row_norms: f64,
    /// Certified `L^2` upper bound, when the MaxCut relaxation was run.
    pub maxcut: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaBoundReport {
    pub n: usize,
    pub k: usize,
    pub sqk2: Option<RelaxationValue>,
    pub sqk2_plus: Option<RelaxationValue>,
    pub sqk3: Option<RelaxationValue>,
    pub feige: Option<RelaxationValue>,
    pub sdpk: Option<RelaxationValue>,
    pub quick: QuickBounds,
    /// `max_i G_ii`, a lower bound for every `k` and exact for `k = 1`.
    pub max_diagonal: f64,
    pub greedy_from_rounding: Option<f64>,
    pub rounding_guarantee: Option<RoundingGuarantee>,
    pub exact: Option<f64>,
    pub upper: f64,
    pub upper_method: String,
    pub lower: f64,
    pub lower_method: String,
}

impl SigmaBoundReport {
    /// Certified upper bound on `sigma_k` itself.
    pub fn sigma_upper(&self) -> f64 {
        self.upper.max(0.0).sqrt()
    }
}

/// Runs the requested methods on `G` and aggregates their bounds.
pub fn sigma_bounds(gram: &DMatrix<f64>, k: usize, opts: &SigmaOptions) -> Result<SigmaBoundReport> {
    let inst = KDenseInstance::from_gram(gram, k)?;
    let g = inst.gram().expect("built from a Gram matrix");
    let n = g.nrows();
    let has = |m: SigmaMethod| opts.methods.contains(&m);

    let sqk2 = has(SigmaMethod::Sqk2)
        .then(|| sqk2_upper(&inst, &opts.sdp))
        .transpose()?;
    let sqk2_plus = has(SigmaMethod::Sqk2Plus)
        .then(|| sqk2_plus_upper(&inst, opts.max_added, &opts.sdp))
        .transpose()?;
    let sqk3 = (has(SigmaMethod::Sqk3) && k >= 2)
        .then(|| sqk3_upper(&inst, &opts.sdp))
        .transpose()?;
    let feige = has(SigmaMethod::Feige)
        .then(|| feige_upper(&inst, &opts.sdp))
        .transpose()?;
    let sdpk = has(SigmaMethod::Sdpk)
        .then(|| sdpk_upper(&inst, &opts.sdp))
        .transpose()?;
    let maxcut = has(SigmaMethod::Maxcut)
        .then(|| maxcut::maxcut_upper(g, &opts.sdp))
        .transpose()?;

    let mut diag: Vec<f64> = (0..n).map(|i| g[(i, i)].max(0.0)).collect();
    let max_diagonal = diag.iter().copied().fold(0.0, f64::max);
    let spectral = k as f64 * sym_eig(g)?.max_value();
    diag.iter_mut().for_each(|d| *d = d.sqrt());
    let row_norms = top_k_sum(&mut diag, k).powi(2);
    let maxcut_sq = maxcut.as_ref().map(|m| m.upper_sdp);
    let quick_value = [Some(spectral), Some(row_norms), maxcut_sq]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    let quick = QuickBounds {
        spectral,
        row_norms,
        maxcut: maxcut_sq,
        value: quick_value,
    };

    let (greedy_from_rounding, rounding_guarantee) = match &sdpk {
        Some(r) if opts.samples > 0 => {
            match hybrid_round_lower(&inst, &r.x, opts.samples, opts.seed) {
                Ok(h) => (
                    Some(h.value),
                    Some(rounding_guarantee(&inst, &r.x, r.certified)),
                ),
                Err(Error::BadX(_)) | Err(Error::DegenerateX) => (None, None),
                Err(e) => return Err(e),
            }
        }
        _ => (None, None),
    };
    let exact = if k == 1 {
        Some(max_diagonal)
    } else if has(SigmaMethod::Exact) {
        Some(sigma_exact_bruteforce(g, k)?)
    } else {
        None
    };

    let mut upper = (quick_value, "quick");
    for (name, r) in [
        ("sqk2", &sqk2),
        ("sqk2+", &sqk2_plus),
        ("sqk3", &sqk3),
        ("feige", &feige),
        ("sdpk", &sdpk),
    ] {
        if let Some(r) = r {
            if r.certified < upper.0 {
                upper = (r.certified, name);
            }
        }
    }
    if let Some(e) = exact {
        if e < upper.0 {
            upper = (e, "exact");
        }
    }
    let mut lower = (max_diagonal, "max_diagonal");
    for (name, v) in [("rounding", greedy_from_rounding), ("exact", exact)] {
        if let Some(v) = v {
            if v > lower.0 {
                lower = (v, name);
            }
        }
    }

    Ok(SigmaBoundReport {
        n,
        k,
        sqk2,
        sqk2_plus,
        sqk3,
        feige,
        sdpk,
        quick,
        max_diagonal,
        greedy_from_rounding,
        rounding_guarantee,
        exact,
        upper: upper.0,
        upper_method: upper.1.to_string(),
        lower: lower.0,
        lower_method: lower.1.to_string(),
    })
}

#[cfg(test)]
mod tests;
