//! Exact 1-D Wasserstein-1 distance between empirical distributions.
//!
//! Computed as the integral of |inverse CDF difference| over the
//! merged quantile grid of the two samples, which is exact for
//! empirical measures of any (possibly different) sizes.

use crate::error::{Error, Result};

/// W1 between the empirical distributions of `a` and `b`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("wasserstein1 needs non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::contract("wasserstein1: samples must be finite"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("finite"));

    let n = xs.len();
    let m = ys.len();
    // Walk the merged quantile breakpoints {i/n} and {j/m}. On each
    // quantile interval the inverse CDFs are the current order
    // statistics, so the contribution is |x_i - y_j| * interval width.
    let mut total = 0.0;
    let mut q = 0.0f64;
    let mut i = 0usize;
    let mut j = 0usize;
    while i < n && j < m {
        let qx = (i + 1) as f64 / n as f64;
        let qy = (j + 1) as f64 / m as f64;
        let next = qx.min(qy);
        total += (xs[i] - ys[j]).abs() * (next - q);
        q = next;
        if qx <= next {
            i += 1;
        }
        if qy <= next {
            j += 1;
        }
    }
    Ok(total)
}
