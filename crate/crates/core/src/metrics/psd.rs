//! Welch power spectral density estimation.
//!
//! Hann-windowed segments of up to 256 samples with 50% overlap,
//! averaged one-sided periodograms, scaled so the PSD integrates to
//! signal power: for a single full-length segment the integral equals
//! the window-weighted mean square exactly (Parseval).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Frequency bands (Hz) used by the spectral summaries: low, mid, high.
pub const BAND_EDGES_HZ: [(f64, f64); 3] = [(0.0, 4.0), (4.0, 15.0), (15.0, 40.0)];

/// One-sided PSD on the grid `freqs[k] = k * sample_rate / segment`.
#[derive(Debug, Clone)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    /// Bin width in Hz.
    pub df: f64,
}

/// Welch estimate for one channel. The segment length is
/// min(256, len); signals shorter than one segment use a single
/// segment, and segments too short for a meaningful Hann taper (< 4
/// samples) fall back to a rectangular window.
pub fn welch_psd(x: &[f64], sample_rate_hz: f64) -> Result<Psd> {
    if x.len() < 2 {
        return Err(Error::contract("welch_psd needs at least 2 samples"));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::contract("welch_psd needs a positive sample rate"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("welch_psd: samples must be finite"));
    }
    let seg = x.len().min(256);
    let hop = (seg / 2).max(1);
    let window: Vec<f64> = if seg >= 4 {
        (0..seg)
            .map(|i| {
                0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (seg - 1) as f64).cos())
            })
            .collect()
    } else {
        vec![1.0; seg]
    };
    let wsum_sq: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg);

    let bins = seg / 2 + 1;
    let mut power = vec![0.0f64; bins];
    let mut segments = 0usize;
    let mut start = 0usize;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); seg];
    while start + seg <= x.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    debug_assert!(segments >= 1);

    // Average over segments and normalize: 1/(fs * sum w^2) per
    // segment, then double interior bins for the one-sided form.
    let scale = 1.0 / (segments as f64 * sample_rate_hz * wsum_sq);
    for p in power.iter_mut() {
        *p *= scale;
    }
    for k in 1..bins {
        let is_nyquist = seg % 2 == 0 && k == bins - 1;
        if !is_nyquist {
            power[k] *= 2.0;
        }
    }

    let df = sample_rate_hz / seg as f64;
    let freqs = (0..bins).map(|k| k as f64 * df).collect();
    Ok(Psd { freqs, power, df })
}

/// Five scalar summaries of one PSD: dominant frequency and spectral
/// centroid (both over non-DC bins, 0 when the spectrum vanishes), and
/// integrated power in the three bands of [`BAND_EDGES_HZ`]; the DC
/// bin counts toward the low band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub dominant_freq_hz: f64,
    pub centroid_hz: f64,
    pub band_power: [f64; 3],
}

pub fn spectral_summary(psd: &Psd) -> SpectralSummary {
    let mut best_k = 0usize;
    let mut best_p = 0.0f64;
    let mut wsum = 0.0;
    let mut psum = 0.0;
    for k in 1..psd.power.len() {
        let p = psd.power[k];
        if p > best_p {
            best_p = p;
            best_k = k;
        }
        wsum += psd.freqs[k] * p;
        psum += p;
    }
    let dominant_freq_hz = if best_p > 0.0 { psd.freqs[best_k] } else { 0.0 };
    let centroid_hz = if psum > 0.0 { wsum / psum } else { 0.0 };

    let mut band_power = [0.0f64; 3];
    for (&f, &p) in psd.freqs.iter().zip(&psd.power) {
        for (b, &(lo, hi)) in BAND_EDGES_HZ.iter().enumerate() {
            // half-open bands, except the last one keeps its upper edge
            let inside = if b == BAND_EDGES_HZ.len() - 1 {
                f >= lo && f <= hi
            } else {
                f >= lo && f < hi
            };
            if inside {
                band_power[b] += p * psd.df;
            }
        }
    }
    SpectralSummary {
        dominant_freq_hz,
        centroid_hz,
        band_power,
    }
}
