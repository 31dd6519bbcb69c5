//! Minimum-cost perfect assignment on a square cost matrix.
//!
//! Shortest-augmenting-path implementation with dual potentials,
//! O(n^3). Used by the best-match pairing policy, where signals are
//! matched to minimize total warping cost before averaging.

use crate::error::{Error, Result};

/// Returns `(assignment, total)` where `assignment[row] = col` and
/// `total` is the sum of the selected entries. The matrix must be
/// square, non-empty, and finite.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::contract("assignment needs a non-empty matrix"));
    }
    for row in cost {
        if row.len() != n {
            return Err(Error::contract("assignment needs a square matrix"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("assignment costs must be finite"));
        }
    }

    // 1-indexed duals and matching; p[j] is the row matched to
    // column j, column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    Ok((assignment, total))
}
