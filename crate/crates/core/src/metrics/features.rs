//! Per-signal summary features used by the distribution metrics.
//!
//! Each channel yields the same fixed feature list; a multichannel
//! signal's vector is the per-channel mean, so the length never
//! depends on the channel count. Rates are per sample (or per-total
//! spectrum for band fractions), so features are comparable across
//! signal lengths.

use super::psd::{spectral_summary, welch_psd, SpectralSummary};
use crate::error::Result;
use crate::signal::MultiLeadSignal;

pub const FEATURE_COUNT: usize = 14;

/// Column names for reports, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean",
    "std",
    "skewness",
    "excess_kurtosis",
    "min",
    "max",
    "rms",
    "zero_crossing_rate",
    "peak_rate",
    "dominant_freq_hz",
    "spectral_centroid_hz",
    "band_frac_low",
    "band_frac_mid",
    "band_frac_high",
];

pub const SPECTRAL_SUMMARY_COUNT: usize = 5;

fn channel_features(x: &[f64], sample_rate_hz: f64) -> Result<[f64; FEATURE_COUNT]> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = m2.sqrt();
    // Shape moments are 0 for (near-)constant channels by convention.
    let (skew, exkurt) = if std > 1e-12 {
        let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        (m3 / (m2 * std), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let crossings = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    let zcr = crossings as f64 / (x.len() - 1) as f64;
    let peaks = (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1])
        .count();
    let peak_rate = peaks as f64 / n;

    let psd = welch_psd(x, sample_rate_hz)?;
    let s = spectral_summary(&psd);
    let total: f64 = psd.power.iter().map(|p| p * psd.df).sum();
    let frac = |b: usize| {
        if total > 0.0 {
            s.band_power[b] / total
        } else {
            0.0
        }
    };

    Ok([
        mean,
        std,
        skew,
        exkurt,
        min,
        max,
        rms,
        zcr,
        peak_rate,
        s.dominant_freq_hz,
        s.centroid_hz,
        frac(0),
        frac(1),
        frac(2),
    ])
}

/// The signal's feature vector: channel features averaged over
/// channels. Always `FEATURE_COUNT` long.
pub fn feature_vector(sig: &MultiLeadSignal) -> Result<Vec<f64>> {
    let mut acc = [0.0f64; FEATURE_COUNT];
    for c in 0..sig.channels() {
        let f = channel_features(sig.channel(c), sig.sample_rate_hz())?;
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
    }
    let scale = 1.0 / sig.channels() as f64;
    Ok(acc.iter().map(|v| v * scale).collect())
}

/// The five spectral summaries (dominant frequency, centroid, three
/// absolute band powers), channel-averaged; used by the spectral
/// similarity score.
pub fn spectral_summary_vector(sig: &MultiLeadSignal) -> Result<Vec<f64>> {
    let mut acc = [0.0f64; SPECTRAL_SUMMARY_COUNT];
    for c in 0..sig.channels() {
        let psd = welch_psd(sig.channel(c), sig.sample_rate_hz())?;
        let SpectralSummary {
            dominant_freq_hz,
            centroid_hz,
            band_power,
        } = spectral_summary(&psd);
        acc[0] += dominant_freq_hz;
        acc[1] += centroid_hz;
        acc[2] += band_power[0];
        acc[3] += band_power[1];
        acc[4] += band_power[2];
    }
    let scale = 1.0 / sig.channels() as f64;
    Ok(acc.iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(chans: Vec<Vec<f64>>, fs: f64) -> MultiLeadSignal {
        let channels = chans.len();
        let samples = chans[0].len();
        let mut data = Vec::new();
        for c in chans {
            data.extend(c);
        }
        MultiLeadSignal::with_default_names(data, channels, samples, fs).unwrap()
    }

    #[test]
    fn vector_length_is_fixed() {
        let s1 = sig(vec![vec![0.0, 1.0, -1.0, 0.5]], 100.0);
        let s3 = sig(
            vec![
                vec![0.0, 1.0, -1.0, 0.5],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![-1.0, 2.0, -2.0, 1.0],
            ],
            100.0,
        );
        assert_eq!(feature_vector(&s1).unwrap().len(), FEATURE_COUNT);
        assert_eq!(feature_vector(&s3).unwrap().len(), FEATURE_COUNT);
        assert_eq!(FEATURE_NAMES.len(), FEATURE_COUNT);
    }

    #[test]
    fn moments_match_hand_computation() {
        // binary channel with p = 1/4 ones: skewness (1-2p)/sqrt(p(1-p))
        // = 2/sqrt(3), excess kurtosis (1-6p(1-p))/(p(1-p)) = -2/3
        let x = vec![0.0, 0.0, 0.0, 1.0];
        let f = channel_features(&x, 100.0).unwrap();
        assert!((f[0] - 0.25).abs() < 1e-15); // mean
        assert!((f[1] - (3.0f64 / 16.0).sqrt()).abs() < 1e-15); // std
        assert!((f[2] - 2.0 / 3.0f64.sqrt()).abs() < 1e-12, "skew {}", f[2]);
        assert!((f[3] + 2.0 / 3.0).abs() < 1e-12, "exkurt {}", f[3]);
        assert_eq!(f[4], 0.0); // min
        assert_eq!(f[5], 1.0); // max
        assert!((f[6] - 0.5).abs() < 1e-15); // rms = sqrt(1/4)
    }

    #[test]
    fn constant_channel_uses_degenerate_conventions() {
        let f = channel_features(&vec![2.0; 64], 100.0).unwrap();
        assert_eq!(f[0], 2.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 0.0);
        assert_eq!(f[4], 2.0);
        assert_eq!(f[5], 2.0);
        assert_eq!(f[7], 0.0); // no zero crossings
        assert_eq!(f[8], 0.0); // no peaks
    }

    #[test]
    fn zero_crossing_and_peak_rates() {
        // alternating signal crosses at every step; the only interior
        // strict maximum is the middle sample
        let x = vec![1.0, -1.0, 1.0, -1.0, 1.0];
        let f = channel_features(&x, 100.0).unwrap();
        assert_eq!(f[7], 1.0);
        assert_eq!(f[8], 1.0 / 5.0);
    }

    #[test]
    fn sine_features_track_its_frequency() {
        let fs = 100.0;
        let x: Vec<f64> = (0..1024)
            .map(|i| (std::f64::consts::TAU * 5.0 * i as f64 / fs).sin())
            .collect();
        let f = channel_features(&x, fs).unwrap();
        assert!((f[9] - 5.0).abs() < 0.5, "dominant {}", f[9]);
        assert!((f[10] - 5.0).abs() < 1.0, "centroid {}", f[10]);
        assert!(f[12] > 0.9, "mid-band fraction {}", f[12]);
        // 5 Hz crosses zero 10 times per second: rate 0.1 per sample
        assert!((f[7] - 0.1).abs() < 0.01, "zcr {}", f[7]);
    }

    #[test]
    fn multichannel_vector_is_the_channel_mean() {
        let a = vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        let b = vec![2.0; 8];
        let s = sig(vec![a.clone(), b.clone()], 100.0);
        let fa = channel_features(&a, 100.0).unwrap();
        let fb = channel_features(&b, 100.0).unwrap();
        let f = feature_vector(&s).unwrap();
        for i in 0..FEATURE_COUNT {
            assert!(
                (f[i] - 0.5 * (fa[i] + fb[i])).abs() < 1e-15,
                "feature {i}"
            );
        }
    }

    #[test]
    fn spectral_summary_vector_has_five_entries() {
        let x: Vec<f64> = (0..256)
            .map(|i| (std::f64::consts::TAU * 2.0 * i as f64 / 100.0).sin())
            .collect();
        let s = sig(vec![x], 100.0);
        let v = spectral_summary_vector(&s).unwrap();
        assert_eq!(v.len(), SPECTRAL_SUMMARY_COUNT);
        assert!((v[0] - 2.0).abs() < 0.5, "dominant {}", v[0]);
    }
}
