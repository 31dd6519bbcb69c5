//! Squared maximum mean discrepancy with an RBF kernel.
//!
//! V-statistic estimate (diagonal terms included), which is biased but
//! nonnegative and exactly zero for identical samples:
//!   MMD^2 = mean k(x,x') + mean k(y,y') - 2 mean k(x,y)
//! with k(a,b) = exp(-||a-b||^2 / (2 sigma^2)). When no bandwidth is
//! given, sigma is the median of all pairwise distances of the pooled
//! samples (falling back to 1 when the median vanishes).

use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance of the pooled sample set; 1.0
/// when every pair coincides. Even counts average the middle pair.
pub fn median_heuristic_sigma(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = xs.iter().chain(ys).collect();
    let mut dists = Vec::new();
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Squared MMD between two vector samples. All vectors must share one
/// dimension; `sigma` overrides the median heuristic when given.
pub fn mmd2_rbf(xs: &[Vec<f64>], ys: &[Vec<f64>], sigma: Option<f64>) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::contract("mmd2_rbf needs non-empty samples"));
    }
    let dim = xs[0].len();
    if dim == 0 {
        return Err(Error::contract("mmd2_rbf needs non-empty vectors"));
    }
    for v in xs.iter().chain(ys) {
        if v.len() != dim {
            return Err(Error::contract("mmd2_rbf: inconsistent vector dimensions"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("mmd2_rbf: samples must be finite"));
        }
    }
    let sigma = match sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::contract(format!(
                "mmd2_rbf: sigma must be positive and finite, got {s}"
            )))
        }
        None => median_heuristic_sigma(xs, ys),
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kernel_mean = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut acc = 0.0;
        for u in a {
            for v in b {
                acc += (-gamma * sq_dist(u, v)).exp();
            }
        }
        acc / (a.len() * b.len()) as f64
    };
    Ok(kernel_mean(xs, xs) + kernel_mean(ys, ys) - 2.0 * kernel_mean(xs, ys))
}
