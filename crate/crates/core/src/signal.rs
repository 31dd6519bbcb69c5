//! Signal containers and the 8-to-12 lead reconstruction algebra.
//!
//! A [`MultiLeadSignal`] is a channels-by-samples matrix of amplitudes at
//! a fixed sample rate. Channel count and length are unconstrained beyond
//! the minimum; 8-lead and 12-lead layouts are named presets.

use crate::error::{Error, Result};

/// The eight independently generated leads, in the order the
/// reconstruction expects them.
pub const EIGHT_LEAD_NAMES: [&str; 8] = ["I", "II", "V1", "V2", "V3", "V4", "V5", "V6"];

/// Full 12-lead layout produced by [`reconstruct_twelve_lead`].
pub const TWELVE_LEAD_NAMES: [&str; 12] = [
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
];

/// Default channel labels for a given channel count: the 8- and 12-lead
/// presets when the count matches, generic `ch1..chN` otherwise.
pub fn default_lead_names(channels: usize) -> Vec<String> {
    match channels {
        8 => EIGHT_LEAD_NAMES.iter().map(|s| s.to_string()).collect(),
        12 => TWELVE_LEAD_NAMES.iter().map(|s| s.to_string()).collect(),
        n => (1..=n).map(|i| format!("ch{i}")).collect(),
    }
}

/// Multichannel time series: row-major channels x samples amplitudes
/// plus a sample rate and ordered channel labels.
///
/// Immutable after construction; all operations on it are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLeadSignal {
    data: Vec<f64>,
    channels: usize,
    samples: usize,
    sample_rate_hz: f64,
    lead_names: Vec<String>,
}

impl MultiLeadSignal {
    /// Build a signal from row-major data, checking every invariant:
    /// at least one channel, at least two samples, all values finite,
    /// one unique name per channel.
    pub fn new(
        data: Vec<f64>,
        channels: usize,
        samples: usize,
        sample_rate_hz: f64,
        lead_names: Vec<String>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::contract("signal needs at least 1 channel"));
        }
        if samples < 2 {
            return Err(Error::contract("signal needs at least 2 samples"));
        }
        if data.len() != channels * samples {
            return Err(Error::contract(format!(
                "data length {} does not match {} channels x {} samples",
                data.len(),
                channels,
                samples
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::contract("sample rate must be positive and finite"));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite amplitude {bad}")));
        }
        if lead_names.len() != channels {
            return Err(Error::contract(format!(
                "{} lead names for {} channels",
                lead_names.len(),
                channels
            )));
        }
        for (i, a) in lead_names.iter().enumerate() {
            if lead_names[..i].contains(a) {
                return Err(Error::contract(format!("duplicate lead name {a:?}")));
            }
        }
        Ok(Self {
            data,
            channels,
            samples,
            sample_rate_hz,
            lead_names,
        })
    }

    /// Same as [`MultiLeadSignal::new`] with default lead names.
    pub fn with_default_names(
        data: Vec<f64>,
        channels: usize,
        samples: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        Self::new(data, channels, samples, sample_rate_hz, default_lead_names(channels))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn lead_names(&self) -> &[String] {
        &self.lead_names
    }

    /// One channel's samples.
    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.samples..(idx + 1) * self.samples]
    }

    /// Row-major view of all amplitudes.
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Binary label vector used to steer conditional generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionVector {
    bits: Vec<u8>,
}

impl ConditionVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::contract("condition vector must have positive width"));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::contract(format!(
                "condition entries must be 0 or 1, found {bad}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn active_bits(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == 1).then_some(i))
            .collect()
    }
}

/// Signals plus one condition vector per signal, homogeneous in shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    signals: Vec<MultiLeadSignal>,
    conditions: Vec<ConditionVector>,
}

impl LabeledDataset {
    pub fn new(signals: Vec<MultiLeadSignal>, conditions: Vec<ConditionVector>) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::contract("dataset must contain at least one signal"));
        }
        if signals.len() != conditions.len() {
            return Err(Error::contract(format!(
                "{} signals but {} conditions",
                signals.len(),
                conditions.len()
            )));
        }
        let (c, s, r) = (
            signals[0].channels(),
            signals[0].samples(),
            signals[0].sample_rate_hz(),
        );
        for (i, sig) in signals.iter().enumerate() {
            if sig.channels() != c || sig.samples() != s || sig.sample_rate_hz() != r {
                return Err(Error::contract(format!(
                    "signal {i} has shape {}x{}@{}Hz, expected {c}x{s}@{r}Hz",
                    sig.channels(),
                    sig.samples(),
                    sig.sample_rate_hz()
                )));
            }
        }
        let d = conditions[0].dim();
        for (i, cond) in conditions.iter().enumerate() {
            if cond.dim() != d {
                return Err(Error::contract(format!(
                    "condition {i} has dim {}, expected {d}",
                    cond.dim()
                )));
            }
        }
        Ok(Self { signals, conditions })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn signals(&self) -> &[MultiLeadSignal] {
        &self.signals
    }

    pub fn conditions(&self) -> &[ConditionVector] {
        &self.conditions
    }

    pub fn signal(&self, i: usize) -> &MultiLeadSignal {
        &self.signals[i]
    }

    pub fn condition(&self, i: usize) -> &ConditionVector {
        &self.conditions[i]
    }

    pub fn channels(&self) -> usize {
        self.signals[0].channels()
    }

    pub fn samples(&self) -> usize {
        self.signals[0].samples()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.signals[0].sample_rate_hz()
    }

    pub fn condition_dim(&self) -> usize {
        self.conditions[0].dim()
    }

    /// Apply [`normalize_per_channel`] to every signal.
    pub fn normalized(&self) -> Self {
        Self {
            signals: self.signals.iter().map(normalize_per_channel).collect(),
            conditions: self.conditions.clone(),
        }
    }
}

/// Derive the four limb/augmented leads from an 8-lead signal.
///
/// Input channels must be exactly `I, II, V1..V6` in that order. Output
/// is the 12-lead layout `I, II, III, aVR, aVL, aVF, V1..V6` with, per
/// sample, `III = II - I`, `aVL = (I - III)/2`, `aVF = (II + III)/2`,
/// `aVR = -(I + II)/2`. The eight input channels are copied unchanged.
pub fn reconstruct_twelve_lead(eight: &MultiLeadSignal) -> Result<MultiLeadSignal> {
    if eight.channels() != 8 {
        return Err(Error::contract(format!(
            "lead reconstruction needs 8 channels, got {}",
            eight.channels()
        )));
    }
    for (got, want) in eight.lead_names().iter().zip(EIGHT_LEAD_NAMES) {
        if got != want {
            return Err(Error::contract(format!(
                "lead reconstruction needs channels named {:?} in order, found {:?}",
                EIGHT_LEAD_NAMES,
                eight.lead_names()
            )));
        }
    }

    let n = eight.samples();
    let lead_i = eight.channel(0);
    let lead_ii = eight.channel(1);
    let mut data = Vec::with_capacity(12 * n);
    data.extend_from_slice(lead_i);
    data.extend_from_slice(lead_ii);

    let mut lead_iii = Vec::with_capacity(n);
    let mut avr = Vec::with_capacity(n);
    let mut avl = Vec::with_capacity(n);
    let mut avf = Vec::with_capacity(n);
    for k in 0..n {
        let iii = lead_ii[k] - lead_i[k];
        lead_iii.push(iii);
        avl.push((lead_i[k] - iii) / 2.0);
        avf.push((lead_ii[k] + iii) / 2.0);
        avr.push(-(lead_i[k] + lead_ii[k]) / 2.0);
    }
    data.extend_from_slice(&lead_iii);
    data.extend_from_slice(&avr);
    data.extend_from_slice(&avl);
    data.extend_from_slice(&avf);
    for c in 2..8 {
        data.extend_from_slice(eight.channel(c));
    }

    MultiLeadSignal::new(
        data,
        12,
        n,
        eight.sample_rate_hz(),
        TWELVE_LEAD_NAMES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Center every channel to mean 0 and, where the population standard
/// deviation exceeds 1e-12, scale it to 1. Degenerate channels are only
/// centered.
pub fn normalize_per_channel(s: &MultiLeadSignal) -> MultiLeadSignal {
    let n = s.samples();
    let mut data = Vec::with_capacity(s.channels() * n);
    for c in 0..s.channels() {
        let ch = s.channel(c);
        let mean = ch.iter().sum::<f64>() / n as f64;
        let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 1e-12 {
            data.extend(ch.iter().map(|v| (v - mean) / std));
        } else {
            data.extend(ch.iter().map(|v| v - mean));
        }
    }
    MultiLeadSignal::new(
        data,
        s.channels(),
        n,
        s.sample_rate_hz(),
        s.lead_names().to_vec(),
    )
    .expect("normalization preserves shape and finiteness")
}
