//! A small self-contained conditioned field network.
//!
//! The model is a multilayer perceptron mapping
//! `concat(flatten(x), time_embedding(t), condition bits)` to a vector
//! of the signal's shape. The condition enters as raw bits: the first
//! dense layer is its learnable embedding. Hidden layers use the SiLU
//! nonlinearity (smooth, so finite-difference checks stay clean); the
//! final layer is linear and zero-initialized, which makes the initial
//! field identically zero. All arithmetic is 64-bit.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamParams, AdamState, EmaState};
pub use checkpoint::{load_model, save_model, Checkpoint, Method, CHECKPOINT_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Seeded};
use crate::signal::ConditionVector;

/// Knobs shared by both training loops. The signal shape itself comes
/// from the dataset, not from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub time_embed_width: usize,
    pub adam: AdamParams,
    /// Parameter averaging rate for the saved checkpoint; see
    /// [`EmaState`]. 0 keeps the raw final weights.
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 4000,
            batch_size: 6,
            hidden_sizes: vec![128, 128],
            time_embed_width: 8,
            adam: AdamParams::default(),
            ema_decay: 0.999,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::contract(
                "train config: steps and batch_size must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::contract(format!(
                "train config: ema_decay {} outside [0, 1)",
                self.ema_decay
            )));
        }
        Ok(())
    }
}

/// Shape and architecture of a [`VelocityModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub condition_dim: usize,
    /// Width of the sinusoidal time embedding; must be even.
    pub time_embed_width: usize,
    pub hidden_sizes: Vec<usize>,
}

impl ModelConfig {
    pub fn signal_dim(&self) -> usize {
        self.channels * self.samples
    }

    pub fn input_dim(&self) -> usize {
        self.signal_dim() + self.time_embed_width + self.condition_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.samples < 2 {
            return Err(Error::contract("model config: invalid signal shape"));
        }
        if self.condition_dim == 0 {
            return Err(Error::contract("model config: condition_dim must be positive"));
        }
        if self.time_embed_width < 2 || self.time_embed_width % 2 != 0 {
            return Err(Error::contract(
                "model config: time_embed_width must be even and at least 2",
            ));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::contract("model config: hidden sizes must be positive"));
        }
        Ok(())
    }
}

/// Sinusoidal embedding of `t` into `width` components: pairs
/// `(sin(w_k t), cos(w_k t))` with `w_k = 2*pi*2^k`, geometrically
/// spaced. Every component lies in [-1, 1].
pub fn time_embedding(t: f64, width: usize, out: &mut Vec<f64>) {
    debug_assert!(width >= 2 && width % 2 == 0);
    for k in 0..width / 2 {
        let w = std::f64::consts::TAU * (1u64 << k) as f64;
        out.push((w * t).sin());
        out.push((w * t).cos());
    }
}

/// One dense layer, row-major `rows x cols` weights plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    fn fan_in_uniform(rows: usize, cols: usize, rng: &mut Seeded) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let mut layer = Self::zeros(rows, cols);
        for v in &mut layer.w {
            *v = (2.0 * rng::uniform01(rng) - 1.0) * bound;
        }
        for v in &mut layer.b {
            *v = (2.0 * rng::uniform01(rng) - 1.0) * bound;
        }
        layer
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.b[r];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            out.push(acc);
        }
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// MLP approximating the conditioned field `f(x, c, t)`.
///
/// Weights are immutable during forward evaluation; the training loop is
/// the single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    cfg: ModelConfig,
    layers: Vec<Dense>,
}

/// Per-layer parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// One supervised item: the field input plus its regression target.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub x: &'a [f64],
    pub condition: &'a ConditionVector,
    pub t: f64,
    pub target: &'a [f64],
}

impl VelocityModel {
    /// Fan-in-scaled uniform init for hidden layers, zero init for the
    /// final layer so the initial field vanishes.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::seeded(seed);
        let mut dims = vec![cfg.input_dim()];
        dims.extend(cfg.hidden_sizes.iter().copied());
        dims.push(cfg.signal_dim());
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let last = i == dims.len() - 2;
            layers.push(if last {
                Dense::zeros(dims[i + 1], dims[i])
            } else {
                Dense::fan_in_uniform(dims[i + 1], dims[i], &mut rng)
            });
        }
        Ok(Self { cfg, layers })
    }

    pub(crate) fn from_parts(cfg: ModelConfig, layers: Vec<Dense>) -> Self {
        Self { cfg, layers }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    fn check_io(&self, x_len: usize, c: &ConditionVector, t: f64) -> Result<()> {
        if x_len != self.cfg.signal_dim() {
            return Err(Error::contract(format!(
                "input length {} does not match model signal dim {}",
                x_len,
                self.cfg.signal_dim()
            )));
        }
        if c.dim() != self.cfg.condition_dim {
            return Err(Error::contract(format!(
                "condition dim {} does not match model condition dim {}",
                c.dim(),
                self.cfg.condition_dim
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::contract(format!("t = {t} outside [0, 1]")));
        }
        Ok(())
    }

    fn assemble_input(&self, x: &[f64], c: &ConditionVector, t: f64) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.cfg.input_dim());
        input.extend_from_slice(x);
        time_embedding(t, self.cfg.time_embed_width, &mut input);
        input.extend(c.bits().iter().map(|&b| b as f64));
        input
    }

    /// Evaluate the field. Deterministic and pure in (weights, inputs).
    pub fn forward(&self, x: &[f64], c: &ConditionVector, t: f64) -> Result<Vec<f64>> {
        self.check_io(x.len(), c, t)?;
        let mut act = self.assemble_input(x, c, t);
        let mut pre = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&act, &mut pre);
            if i + 1 < self.layers.len() {
                act.clear();
                act.extend(pre.iter().map(|&z| silu(z)));
            } else {
                act.clone_from(&pre);
            }
        }
        Ok(act)
    }

    /// Forward pass keeping per-layer inputs and pre-activations for
    /// backprop.
    fn forward_trace(
        &self,
        x: &[f64],
        c: &ConditionVector,
        t: f64,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut act = self.assemble_input(x, c, t);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::new();
            layer.apply(&act, &mut pre);
            inputs.push(std::mem::take(&mut act));
            if i + 1 < self.layers.len() {
                act = pre.iter().map(|&z| silu(z)).collect();
            }
            pres.push(pre);
        }
        (inputs, pres)
    }

    /// Mean-squared-error loss and analytic gradients over a batch:
    /// `L = mean over items of mean over elements of (f(x,c,t) - target)^2`.
    pub fn backward(&self, items: &[TrainItem]) -> Result<(Gradients, f64)> {
        if items.is_empty() {
            return Err(Error::contract("backward needs a non-empty batch"));
        }
        let out_dim = self.cfg.signal_dim();
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.rows, l.cols))
                .collect(),
        };
        let norm = 1.0 / (items.len() as f64 * out_dim as f64);
        let mut loss = 0.0;

        for item in items {
            self.check_io(item.x.len(), item.condition, item.t)?;
            if item.target.len() != out_dim {
                return Err(Error::contract(format!(
                    "target length {} does not match model signal dim {out_dim}",
                    item.target.len()
                )));
            }
            let (inputs, pres) = self.forward_trace(item.x, item.condition, item.t);
            let out = pres.last().expect("at least one layer");

            // dL/d(out_j) = 2 (out_j - target_j) * norm
            let mut delta: Vec<f64> = out
                .iter()
                .zip(item.target)
                .map(|(o, tgt)| {
                    let r = o - tgt;
                    loss += r * r * norm;
                    2.0 * r * norm
                })
                .collect();

            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &inputs[l];
                let g = &mut grads.layers[l];
                for r in 0..layer.rows {
                    let d = delta[r];
                    g.b[r] += d;
                    let grow = &mut g.w[r * layer.cols..(r + 1) * layer.cols];
                    for (gv, iv) in grow.iter_mut().zip(input) {
                        *gv += d * iv;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.cols];
                    for r in 0..layer.rows {
                        let d = delta[r];
                        let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                        for (pv, wv) in prev.iter_mut().zip(row) {
                            *pv += d * wv;
                        }
                    }
                    let pre_prev = &pres[l - 1];
                    for (pv, &z) in prev.iter_mut().zip(pre_prev) {
                        *pv *= silu_prime(z);
                    }
                    delta = prev;
                }
            }
        }
        Ok((grads, loss))
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameter access (weights then bias, layer by layer); used
    /// by finite-difference checks and parameter-level tests.
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, v: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w[idx] = v;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = v;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// All parameters finite?
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

impl Gradients {
    /// Flat gradient access matching [`VelocityModel::get_param`] order.
    pub fn get(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("gradient index out of range");
    }
}

/// Test-only helpers shared across this crate's unit tests.
#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub(crate) fn small_cfg() -> ModelConfig {
        ModelConfig {
            channels: 2,
            samples: 6,
            sample_rate_hz: 100.0,
            condition_dim: 3,
            time_embed_width: 4,
            hidden_sizes: vec![8, 7],
        }
    }

    /// A model with every parameter (final layer included) drawn from
    /// a seeded uniform, for tests that need a non-trivial field.
    pub(crate) fn randomized(cfg: ModelConfig, seed: u64) -> VelocityModel {
        let mut m = VelocityModel::init(cfg, seed).unwrap();
        let mut r = rng::seeded(seed ^ 0xABCD);
        for i in 0..m.param_count() {
            m.set_param(i, 0.4 * (2.0 * rng::uniform01(&mut r) - 1.0));
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::{randomized, small_cfg};
    use super::*;

    #[test]
    fn zero_final_layer_means_zero_output() {
        let m = VelocityModel::init(small_cfg(), 1).unwrap();
        let mut r = rng::seeded(2);
        let x = rng::standard_normal_vec(&mut r, 12);
        let c = ConditionVector::new(vec![1, 0, 1]).unwrap();
        let out = m.forward(&x, &c, 0.3).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = randomized(small_cfg(), 3);
        let mut r = rng::seeded(4);
        let x = rng::standard_normal_vec(&mut r, 12);
        let c = ConditionVector::new(vec![0, 1, 0]).unwrap();
        assert_eq!(m.forward(&x, &c, 0.7).unwrap(), m.forward(&x, &c, 0.7).unwrap());
    }

    #[test]
    fn conditioning_path_is_live() {
        let m = randomized(small_cfg(), 5);
        let mut r = rng::seeded(6);
        let x = rng::standard_normal_vec(&mut r, 12);
        let a = ConditionVector::new(vec![1, 0, 0]).unwrap();
        let b = ConditionVector::new(vec![0, 0, 1]).unwrap();
        assert_ne!(m.forward(&x, &a, 0.5).unwrap(), m.forward(&x, &b, 0.5).unwrap());
    }

    #[test]
    fn forward_rejects_bad_shapes_and_t() {
        let m = VelocityModel::init(small_cfg(), 1).unwrap();
        let c = ConditionVector::new(vec![1, 0, 1]).unwrap();
        assert!(m.forward(&[0.0; 5], &c, 0.5).is_err());
        let bad_c = ConditionVector::new(vec![1]).unwrap();
        assert!(m.forward(&[0.0; 12], &bad_c, 0.5).is_err());
        assert!(m.forward(&[0.0; 12], &c, 1.5).is_err());
    }

    #[test]
    fn time_embedding_components_bounded() {
        for &t in &[0.0, 0.25, 0.5, 0.77, 1.0] {
            let mut e = Vec::new();
            time_embedding(t, 8, &mut e);
            assert_eq!(e.len(), 8);
            assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn zero_residual_means_zero_loss_and_gradients() {
        let m = randomized(small_cfg(), 7);
        let mut r = rng::seeded(8);
        let x = rng::standard_normal_vec(&mut r, 12);
        let c = ConditionVector::new(vec![1, 1, 0]).unwrap();
        let target = m.forward(&x, &c, 0.4).unwrap();
        let item = TrainItem {
            x: &x,
            condition: &c,
            t: 0.4,
            target: &target,
        };
        let (grads, loss) = m.backward(&[item]).unwrap();
        assert_eq!(loss, 0.0);
        for i in 0..m.param_count() {
            assert_eq!(grads.get(i), 0.0);
        }
    }

    #[test]
    fn doubling_residuals_quadruples_loss() {
        let m = randomized(small_cfg(), 9);
        let mut r = rng::seeded(10);
        let x = rng::standard_normal_vec(&mut r, 12);
        let c = ConditionVector::new(vec![0, 1, 1]).unwrap();
        let out = m.forward(&x, &c, 0.6).unwrap();
        let shift: Vec<f64> = rng::standard_normal_vec(&mut r, 12);
        let t1: Vec<f64> = out.iter().zip(&shift).map(|(o, s)| o + s).collect();
        let t2: Vec<f64> = out.iter().zip(&shift).map(|(o, s)| o + 2.0 * s).collect();
        let (_, l1) = m
            .backward(&[TrainItem { x: &x, condition: &c, t: 0.6, target: &t1 }])
            .unwrap();
        let (_, l2) = m
            .backward(&[TrainItem { x: &x, condition: &c, t: 0.6, target: &t2 }])
            .unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-9, "ratio {}", l2 / l1);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let cfg = small_cfg();
        for seed in 0..3u64 {
            let mut m = randomized(cfg.clone(), 20 + seed);
            let mut r = rng::seeded(40 + seed);
            let x = rng::standard_normal_vec(&mut r, cfg.signal_dim());
            let target = rng::standard_normal_vec(&mut r, cfg.signal_dim());
            let c = ConditionVector::new(vec![1, 0, 1]).unwrap();
            let item = TrainItem {
                x: &x,
                condition: &c,
                t: 0.35,
                target: &target,
            };
            let (grads, _) = m.backward(&[item]).unwrap();
            let h = 1e-5;
            for i in 0..m.param_count() {
                let orig = m.get_param(i);
                m.set_param(i, orig + h);
                let (_, lp) = m.backward(&[item]).unwrap();
                m.set_param(i, orig - h);
                let (_, lm) = m.backward(&[item]).unwrap();
                m.set_param(i, orig);
                let fd = (lp - lm) / (2.0 * h);
                let rel = (grads.get(i) - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", grads.get(i));
            }
        }
    }
}
