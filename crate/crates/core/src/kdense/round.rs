//! Greedy pruning and the hybrid Gaussian/Bernoulli rounding of an `SDP_k`
//! solution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::KDenseInstance;
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::rng::{stream_rng, NormalSampler};

/// `w(S) = sum_{i, j in S} M_ij`.
pub fn subset_weight(m: &DMatrix<f64>, set: &[usize]) -> f64 {
    let mut w = 0.0;
    for &j in set {
        for &i in set {
            w += m[(i, j)];
        }
    }
    w
}

/// Lower bound `k(k-1) / (|I|(|I|-1)) * w(I)` guaranteed by greedy pruning
/// of `I` down to `k` vertices (for nonnegative `w(I)` and a nonnegative
/// diagonal).
pub fn prune_guarantee(size: usize, k: usize, weight: f64) -> f64 {
    if size <= k {
        return weight;
    }
    (k * (k - 1)) as f64 / (size * (size - 1)) as f64 * weight
}

/// Removes vertices one at a time, each time the one whose removal loses
/// the least weight (lowest index on ties), until `k` remain.
fn prune(m: &DMatrix<f64>, set: &[usize], k: usize) -> Vec<usize> {
    let mut set: Vec<usize> = set.to_vec();
    set.sort_unstable();
    // contrib[a] = sum_{i in S} M_{i, set[a]}
    let mut contrib: Vec<f64> = set
        .iter()
        .map(|&j| set.iter().map(|&i| m[(i, j)]).sum())
        .collect();
    while set.len() > k {
        let mut best = 0;
        let mut best_loss = f64::INFINITY;
        for (a, &j) in set.iter().enumerate() {
            let loss = 2.0 * contrib[a] - m[(j, j)];
            if loss < best_loss {
                best_loss = loss;
                best = a;
            }
        }
        let removed = set.remove(best);
        contrib.remove(best);
        for (a, &j) in set.iter().enumerate() {
            contrib[a] -= m[(removed, j)];
        }
    }
    set
}

/// Greedily prunes `set` to exactly `k` vertices. Returns the sorted subset
/// and its weight.
pub fn greedy_prune(m: &DMatrix<f64>, set: &[usize], k: usize) -> Result<(Vec<usize>, f64)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension("weight matrix must be square".into()));
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= n) {
        return Err(Error::Dimension(format!("index {bad} out of range for {n} vertices")));
    }
    let mut uniq = set.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != set.len() {
        return Err(Error::InvalidArgument("index set has duplicates".into()));
    }
    if k < 2 || k > set.len() {
        return Err(Error::BadK {
            k,
            min: 2,
            max: set.len(),
        });
    }
    let subset = prune(m, &uniq, k);
    let weight = subset_weight(m, &subset);
    Ok((subset, weight))
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridRounding {
    /// Best `w^T M w` over the samples.
    pub value: f64,
    /// Maximizing indicator vector, `Card(w) <= k`.
    pub indicator: Vec<u8>,
    /// Sample index that produced it.
    pub sample: usize,
    /// Number of samples that needed pruning.
    pub pruned_samples: usize,
}

struct RoundingPlan {
    active: Vec<usize>,
    factor: DMatrix<f64>,
    probs: Vec<f64>,
}

fn plan(inst: &KDenseInstance, x: &DMatrix<f64>) -> Result<RoundingPlan> {
    let n = inst.dim();
    let k = inst.k() as f64;
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Dimension(format!(
            "X must be {n}x{n}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let tr_dev = (x.trace() - k).abs();
    if !(tr_dev <= 1e-6 * k.max(1.0)) {
        return Err(Error::BadX(tr_dev));
    }
    let box_dev = x
        .iter()
        .fold(0.0f64, |a, &v| a.max(-v).max(v - 1.0));
    if !(box_dev <= 1e-6) {
        return Err(Error::BadX(box_dev));
    }
    let active: Vec<usize> = (0..n).filter(|&i| x[(i, i)] > 1e-12).collect();
    if active.is_empty() {
        return Err(Error::DegenerateX);
    }
    let roots: Vec<f64> = active.iter().map(|&i| x[(i, i)].sqrt()).collect();
    let a = active.len();
    let corr = DMatrix::from_fn(a, a, |p, q| {
        if p == q {
            1.0
        } else {
            x[(active[p], active[q])] / (roots[p] * roots[q])
        }
    });
    let corr = (&corr + corr.transpose()) * 0.5;
    let factor = psd_factor(&corr)?;
    let total: f64 = roots.iter().sum();
    let probs = roots
        .iter()
        .map(|r| (k * r / total).clamp(0.0, 1.0))
        .collect();
    Ok(RoundingPlan {
        active,
        factor,
        probs,
    })
}

/// One sample: normals for `z ~ N(0, C)` first, then one uniform per active
/// index for the Bernoulli mask. Returns the selected vertices.
fn draw(plan: &RoundingPlan, seed: u64, stream: u64) -> Vec<usize> {
    let a = plan.active.len();
    let mut rng = stream_rng(seed, stream);
    let mut ns = NormalSampler::new();
    let mut g = DVector::zeros(a);
    ns.fill(&mut rng, g.as_mut_slice());
    let z = &plan.factor * g;
    let mut chosen = Vec::new();
    for p in 0..a {
        let keep = rng.random::<f64>() < plan.probs[p];
        if keep && z[p] >= 0.0 {
            chosen.push(plan.active[p]);
        }
    }
    chosen
}

/// Best of `samples` hybrid roundings of an `SDP_k` solution `x`; samples
/// with more than `k` vertices are greedily pruned to `k`.
pub fn hybrid_round_lower(
    inst: &KDenseInstance,
    x: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<HybridRounding> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let plan = plan(inst, x)?;
    let m = inst.weights();
    let k = inst.k();
    let results: Vec<(f64, bool)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let chosen = draw(&plan, seed, s as u64);
            if chosen.len() > k {
                let subset = prune(m, &chosen, k);
                (subset_weight(m, &subset), true)
            } else {
                (subset_weight(m, &chosen), false)
            }
        })
        .collect();
    let mut best = 0;
    for (s, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = s;
        }
    }
    let mut chosen = draw(&plan, seed, best as u64);
    if chosen.len() > k {
        chosen = prune(m, &chosen, k);
    }
    let mut indicator = vec![0u8; inst.dim()];
    for &i in &chosen {
        indicator[i] = 1;
    }
    Ok(HybridRounding {
        value: results[best].0,
        indicator,
        sample: best,
        pruned_samples: results.iter().filter(|r| r.1).count(),
    })
}
