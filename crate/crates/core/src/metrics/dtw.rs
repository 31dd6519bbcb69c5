//! Dynamic time warping between multichannel signals.
//!
//! Full O(n*m) dynamic program over per-frame distances, where a frame
//! is the vector of all channel values at one sample index. The result
//! is the unnormalized accumulated cost along the best monotone
//! alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultiLeadSignal;

/// Per-frame distance between aligned sample vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtwDist {
    /// Sum over channels of squared differences (the default).
    SqEuclidean,
    /// Sum over channels of absolute differences.
    Abs,
}

impl Default for DtwDist {
    fn default() -> Self {
        DtwDist::SqEuclidean
    }
}

impl DtwDist {
    fn frame(&self, a: &MultiLeadSignal, i: usize, b: &MultiLeadSignal, j: usize) -> f64 {
        let ch = a.channels();
        let mut acc = 0.0;
        for c in 0..ch {
            let d = a.channel(c)[i] - b.channel(c)[j];
            acc += match self {
                DtwDist::SqEuclidean => d * d,
                DtwDist::Abs => d.abs(),
            };
        }
        acc
    }
}

/// Accumulated warping cost between two signals with the same channel
/// count (sample counts may differ).
pub fn dtw(a: &MultiLeadSignal, b: &MultiLeadSignal, dist: DtwDist) -> Result<f64> {
    if a.channels() != b.channels() {
        return Err(Error::contract(format!(
            "dtw: channel counts differ ({} vs {})",
            a.channels(),
            b.channels()
        )));
    }
    let n = a.samples();
    let m = b.samples();
    // Two-row dynamic program; prev[j] = D[i-1][j], cur[j] = D[i][j].
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for i in 0..n {
        for j in 0..m {
            let d = dist.frame(a, i, b, j);
            cur[j] = d + match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}
