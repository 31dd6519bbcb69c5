//! Distribution-level comparison of a generated signal set against a
//! reference set: warping distance on raw waveforms, transport and
//! kernel distances on summary features, and a spectral similarity
//! score.

pub mod assignment;
pub mod dtw;
pub mod features;
pub mod mmd;
pub mod psd;
pub mod wasserstein;

pub use assignment::min_cost_assignment;
pub use dtw::{dtw, DtwDist};
pub use features::{feature_vector, spectral_summary_vector, FEATURE_COUNT, FEATURE_NAMES};
pub use mmd::{median_heuristic_sigma, mmd2_rbf};
pub use psd::{spectral_summary, welch_psd, Psd, SpectralSummary, BAND_EDGES_HZ};
pub use wasserstein::wasserstein1;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::LabeledDataset;

/// How generated signals are paired with reference signals for the
/// warping distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairingPolicy {
    /// Pair by index. Equal-sized sets pair one-to-one in order, so a
    /// set compared against itself scores zero; a larger set is first
    /// subsampled (seeded) to the smaller size.
    #[default]
    IndexAligned,
    /// Pair by minimum-cost assignment over the full warping-cost
    /// matrix.
    BestMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub dtw_dist: DtwDist,
    pub pairing: PairingPolicy,
    /// Seed for the subsampling draws; everything else is
    /// deterministic in the inputs.
    pub seed: u64,
    /// Cap on the number of warping pairs (and on the assignment size
    /// for best-match pairing).
    pub max_dtw_pairs: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            dtw_dist: DtwDist::default(),
            pairing: PairingPolicy::default(),
            seed: 0,
            max_dtw_pairs: None,
        }
    }
}

/// One evaluation's scores plus the shape of what was compared.
/// Lower is better for the three distances; `spectral_similarity` is
/// in (0, 1] and 1 means spectrally indistinguishable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dtw: f64,
    pub wasserstein: f64,
    pub mmd2: f64,
    pub spectral_similarity: f64,
    pub n_real: usize,
    pub n_generated: usize,
    pub dtw_pairs: usize,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::contract(format!("invalid metric report JSON: {e}")))
    }

    pub fn csv_header() -> &'static str {
        "dtw,wasserstein,mmd2,spectral_similarity"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.dtw, self.wasserstein, self.mmd2, self.spectral_similarity
        )
    }
}

/// Sorted draw of `amount` distinct indices from `0..len`.
fn subsample_indices(seed: u64, label: &str, len: usize, amount: usize) -> Vec<usize> {
    let mut r = rng::seeded(rng::child_seed(seed, label, 0));
    let mut idx = sample(&mut r, len, amount).into_vec();
    idx.sort_unstable();
    idx
}

fn check_comparable(real: &LabeledDataset, generated: &LabeledDataset) -> Result<()> {
    if real.channels() != generated.channels() || real.samples() != generated.samples() {
        return Err(Error::contract(format!(
            "evaluate: shapes differ ({}x{} vs {}x{})",
            real.channels(),
            real.samples(),
            generated.channels(),
            generated.samples()
        )));
    }
    if real.sample_rate_hz() != generated.sample_rate_hz() {
        return Err(Error::contract(format!(
            "evaluate: sample rates differ ({} vs {})",
            real.sample_rate_hz(),
            generated.sample_rate_hz()
        )));
    }
    Ok(())
}

/// Run the full metric suite.
pub fn evaluate_all(
    real: &LabeledDataset,
    generated: &LabeledDataset,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    check_comparable(real, generated)?;

    // Feature-space metrics.
    let real_feats: Vec<Vec<f64>> = real
        .signals()
        .iter()
        .map(feature_vector)
        .collect::<Result<_>>()?;
    let gen_feats: Vec<Vec<f64>> = generated
        .signals()
        .iter()
        .map(feature_vector)
        .collect::<Result<_>>()?;

    let mut w_acc = 0.0;
    for col in 0..FEATURE_COUNT {
        let a: Vec<f64> = real_feats.iter().map(|f| f[col]).collect();
        let b: Vec<f64> = gen_feats.iter().map(|f| f[col]).collect();
        w_acc += wasserstein1(&a, &b)?;
    }
    let wasserstein = w_acc / FEATURE_COUNT as f64;

    let mmd2 = mmd2_rbf(&real_feats, &gen_feats, None)?;

    // Spectral similarity over the five spectral summaries.
    let real_spec: Vec<Vec<f64>> = real
        .signals()
        .iter()
        .map(spectral_summary_vector)
        .collect::<Result<_>>()?;
    let gen_spec: Vec<Vec<f64>> = generated
        .signals()
        .iter()
        .map(spectral_summary_vector)
        .collect::<Result<_>>()?;
    let mut s_acc = 0.0;
    for col in 0..features::SPECTRAL_SUMMARY_COUNT {
        let a: Vec<f64> = real_spec.iter().map(|f| f[col]).collect();
        let b: Vec<f64> = gen_spec.iter().map(|f| f[col]).collect();
        s_acc += wasserstein1(&a, &b)?;
    }
    let spectral_similarity = 1.0 / (1.0 + s_acc / features::SPECTRAL_SUMMARY_COUNT as f64);

    // Warping distance over paired signals.
    let nr = real.len();
    let ng = generated.len();
    let m = nr
        .min(ng)
        .min(opts.max_dtw_pairs.unwrap_or(usize::MAX).max(1));
    let (ri, gi): (Vec<usize>, Vec<usize>) = if nr == ng {
        // One index draw shared by both sides keeps identical sets at
        // exactly zero even when capped.
        let idx = if m == nr {
            (0..nr).collect::<Vec<_>>()
        } else {
            subsample_indices(opts.seed, "dtw-pairs", nr, m)
        };
        (idx.clone(), idx)
    } else {
        let ri = if m == nr {
            (0..nr).collect()
        } else {
            subsample_indices(opts.seed, "dtw-real", nr, m)
        };
        let gi = if m == ng {
            (0..ng).collect()
        } else {
            subsample_indices(opts.seed, "dtw-generated", ng, m)
        };
        (ri, gi)
    };

    let dtw_mean = match opts.pairing {
        PairingPolicy::IndexAligned => {
            let mut acc = 0.0;
            for (&i, &j) in ri.iter().zip(&gi) {
                acc += dtw(real.signal(i), generated.signal(j), opts.dtw_dist)?;
            }
            acc / m as f64
        }
        PairingPolicy::BestMatch => {
            let mut cost = vec![vec![0.0f64; m]; m];
            for (a, &i) in ri.iter().enumerate() {
                for (b, &j) in gi.iter().enumerate() {
                    cost[a][b] = dtw(real.signal(i), generated.signal(j), opts.dtw_dist)?;
                }
            }
            let (_, total) = min_cost_assignment(&cost)?;
            total / m as f64
        }
    };

    Ok(MetricReport {
        dtw: dtw_mean,
        wasserstein,
        mmd2,
        spectral_similarity,
        n_real: nr,
        n_generated: ng,
        dtw_pairs: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ConditionVector, MultiLeadSignal};
    use crate::synth::{synth_dataset, SynthSpec};

    fn dataset(seed: u64, n: usize) -> LabeledDataset {
        synth_dataset(&SynthSpec {
            n_signals: n,
            channels: 2,
            samples: 64,
            sample_rate_hz: 100.0,
            condition_dim: 4,
            rng_seed: seed,
            noise_std: 0.03,
            bumps_per_beat: 3,
            phase_levels: None,
        })
        .unwrap()
    }

    fn perturbed(ds: &LabeledDataset, amp: f64) -> LabeledDataset {
        let mut r = crate::rng::seeded(999);
        let signals: Vec<MultiLeadSignal> = ds
            .signals()
            .iter()
            .map(|s| {
                let data: Vec<f64> = s
                    .data()
                    .iter()
                    .map(|v| v + amp * crate::rng::standard_normal(&mut r))
                    .collect();
                MultiLeadSignal::with_default_names(
                    data,
                    s.channels(),
                    s.samples(),
                    s.sample_rate_hz(),
                )
                .unwrap()
            })
            .collect();
        LabeledDataset::new(signals, ds.conditions().to_vec()).unwrap()
    }

    #[test]
    fn identical_sets_score_perfectly() {
        let ds = dataset(200, 12);
        let r = evaluate_all(&ds, &ds, &EvalOptions::default()).unwrap();
        assert_eq!(r.dtw, 0.0);
        assert_eq!(r.wasserstein, 0.0);
        assert_eq!(r.mmd2, 0.0);
        assert_eq!(r.spectral_similarity, 1.0);
        assert_eq!(r.dtw_pairs, 12);
    }

    #[test]
    fn identical_sets_stay_perfect_under_a_pair_cap() {
        let ds = dataset(201, 10);
        let opts = EvalOptions {
            max_dtw_pairs: Some(4),
            ..EvalOptions::default()
        };
        let r = evaluate_all(&ds, &ds, &opts).unwrap();
        assert_eq!(r.dtw, 0.0);
        assert_eq!(r.dtw_pairs, 4);
    }

    /// Duplicating the generated set leaves its empirical distribution
    /// unchanged, so the distribution-level scores must not move.
    #[test]
    fn distribution_metrics_are_duplication_invariant() {
        let ds = dataset(202, 8);
        let doubled = LabeledDataset::new(
            ds.signals()
                .iter()
                .chain(ds.signals())
                .cloned()
                .collect(),
            ds.conditions()
                .iter()
                .chain(ds.conditions())
                .cloned()
                .collect(),
        )
        .unwrap();
        let r = evaluate_all(&ds, &doubled, &EvalOptions::default()).unwrap();
        assert!(r.wasserstein.abs() < 1e-12, "w {}", r.wasserstein);
        assert!(r.mmd2.abs() < 1e-12, "mmd {}", r.mmd2);
        assert!((r.spectral_similarity - 1.0).abs() < 1e-12);
        assert_eq!(r.n_generated, 16);
        assert_eq!(r.dtw_pairs, 8);
    }

    /// A permuted copy is a perfect match under best-match pairing but
    /// not under index alignment.
    #[test]
    fn best_match_finds_the_permutation() {
        let ds = dataset(203, 9);
        let n = ds.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + 4) % n).collect();
        let shuffled = LabeledDataset::new(
            perm.iter().map(|&i| ds.signal(i).clone()).collect(),
            perm.iter().map(|&i| ds.condition(i).clone()).collect(),
        )
        .unwrap();
        let aligned = evaluate_all(&ds, &shuffled, &EvalOptions::default()).unwrap();
        assert!(aligned.dtw > 0.0);
        let best = evaluate_all(
            &ds,
            &shuffled,
            &EvalOptions {
                pairing: PairingPolicy::BestMatch,
                ..EvalOptions::default()
            },
        )
        .unwrap();
        assert!(best.dtw <= 1e-12, "best-match dtw {}", best.dtw);
    }

    #[test]
    fn noise_degrades_every_metric() {
        let ds = dataset(204, 10);
        let noisy = perturbed(&ds, 0.8);
        let r = evaluate_all(&ds, &noisy, &EvalOptions::default()).unwrap();
        assert!(r.dtw > 0.1, "dtw {}", r.dtw);
        assert!(r.wasserstein > 0.01, "w {}", r.wasserstein);
        assert!(r.mmd2 > 1e-4, "mmd {}", r.mmd2);
        assert!(r.spectral_similarity < 0.999, "spec {}", r.spectral_similarity);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = dataset(205, 3);
        let b = synth_dataset(&SynthSpec {
            n_signals: 3,
            channels: 2,
            samples: 32,
            sample_rate_hz: 100.0,
            condition_dim: 4,
            rng_seed: 205,
            noise_std: 0.03,
            bumps_per_beat: 3,
            phase_levels: None,
        })
        .unwrap();
        assert!(evaluate_all(&a, &b, &EvalOptions::default()).is_err());
    }

    #[test]
    fn report_round_trips_through_json_and_names_its_fields() {
        let r = MetricReport {
            dtw: 1.25,
            wasserstein: 0.5,
            mmd2: 0.001,
            spectral_similarity: 0.9,
            n_real: 10,
            n_generated: 12,
            dtw_pairs: 10,
        };
        let json = r.to_json();
        for field in [
            "\"dtw\"",
            "\"wasserstein\"",
            "\"mmd2\"",
            "\"spectral_similarity\"",
            "\"n_real\"",
            "\"n_generated\"",
            "\"dtw_pairs\"",
        ] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
        assert_eq!(MetricReport::from_json(&json).unwrap(), r);
        assert_eq!(MetricReport::csv_header(), "dtw,wasserstein,mmd2,spectral_similarity");
        assert_eq!(r.to_csv_row(), "1.25,0.5,0.001,0.9");
    }

    #[test]
    fn different_sizes_pair_down_to_the_smaller_set() {
        let a = dataset(206, 6);
        let big = dataset(207, 11);
        let r = evaluate_all(&a, &big, &EvalOptions::default()).unwrap();
        assert_eq!(r.dtw_pairs, 6);
        assert_eq!(r.n_generated, 11);
        assert!(r.dtw.is_finite());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let a = dataset(208, 7);
        let b = perturbed(&a, 0.3);
        let r1 = evaluate_all(&a, &b, &EvalOptions::default()).unwrap();
        let r2 = evaluate_all(&a, &b, &EvalOptions::default()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn conditions_do_not_enter_the_metrics() {
        // same signals, different labels: the report only reflects
        // waveforms
        let ds = dataset(209, 5);
        let relabeled = LabeledDataset::new(
            ds.signals().to_vec(),
            (0..5)
                .map(|_| ConditionVector::new(vec![1, 0, 0, 0]).unwrap())
                .collect(),
        )
        .unwrap();
        let r = evaluate_all(&ds, &relabeled, &EvalOptions::default()).unwrap();
        assert_eq!(r.dtw, 0.0);
        assert_eq!(r.mmd2, 0.0);
    }
}
