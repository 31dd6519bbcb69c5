//! Denoising diffusion baseline: forward noising, noise-prediction
//! training, and a strided ancestral sampler.
//!
//! The sampler supports fewer evaluations than the schedule length by
//! walking a strided subset of timesteps and recomputing the effective
//! per-step noise fraction from signal-retention ratios, so a strided
//! walk stays consistent with the full chain it skips through. The
//! posterior variance is the "small" choice
//! `(1 - abar_prev) / (1 - abar_t) * beta_eff`, which vanishes on the
//! final step and keeps short chains from over-noising.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, Checkpoint, EmaState, Gradients, Method, ModelConfig, TrainConfig,
    TrainItem, VelocityModel};
use crate::ode::VectorField;
use crate::par::parallel_map_indexed;
use crate::rng::{self, Seeded};
use crate::signal::{ConditionVector, LabeledDataset};

/// Parameters of the linear noise schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t_count: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            t_count: 200,
            beta_min: 1e-4,
            beta_max: 0.02,
        }
    }
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_count < 2 {
            return Err(Error::contract("schedule needs at least 2 timesteps"));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max && self.beta_max < 1.0) {
            return Err(Error::contract(format!(
                "schedule needs 0 < beta_min <= beta_max < 1, got [{}, {}]",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        self.validate()?;
        NoiseSchedule::new(*self)
    }
}

/// Precomputed linear schedule: betas and cumulative signal retention.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    spec: ScheduleSpec,
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    fn new(spec: ScheduleSpec) -> Result<Self> {
        let t = spec.t_count;
        let mut betas = Vec::with_capacity(t);
        // Barycentric interpolation keeps both endpoints exact.
        for i in 0..t {
            let s = i as f64 / (t - 1) as f64;
            betas.push(spec.beta_min * (1.0 - s) + spec.beta_max * s);
        }
        let mut alpha_bar = Vec::with_capacity(t);
        let mut acc = 1.0;
        for &b in &betas {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        Ok(Self {
            spec,
            betas,
            alpha_bar,
        })
    }

    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    pub fn t_count(&self) -> usize {
        self.spec.t_count
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Timestep index mapped into the model's [0, 1] time input.
    pub fn normalized_time(&self, t: usize) -> f64 {
        t as f64 / (self.spec.t_count - 1) as f64
    }
}

/// Forward noising: `x_t = sqrt(abar) x0 + sqrt(1 - abar) eps`.
pub fn q_sample(x0: &[f64], alpha_bar_t: f64, eps: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != eps.len() {
        return Err(Error::contract("q_sample: x0 and eps lengths differ"));
    }
    if !(0.0 < alpha_bar_t && alpha_bar_t <= 1.0) {
        return Err(Error::contract(format!(
            "q_sample: alpha_bar {alpha_bar_t} outside (0, 1]"
        )));
    }
    let a = alpha_bar_t.sqrt();
    let b = (1.0 - alpha_bar_t).sqrt();
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// The `nfe` retained timestep indices, descending. Computed as
/// round(linspace(0, t_count-1, nfe)), which always keeps both ends of
/// the chain; requires `1 <= nfe <= t_count`.
pub fn strided_timesteps(t_count: usize, nfe: usize) -> Result<Vec<usize>> {
    if nfe == 0 || nfe > t_count {
        return Err(Error::contract(format!(
            "nfe must be in 1..={t_count}, got {nfe}"
        )));
    }
    if nfe == 1 {
        return Ok(vec![t_count - 1]);
    }
    let mut idx: Vec<usize> = (0..nfe)
        .map(|k| {
            let pos = k as f64 * (t_count - 1) as f64 / (nfe - 1) as f64;
            pos.round() as usize
        })
        .collect();
    idx.reverse();
    Ok(idx)
}

/// All retained states of one ancestral walk: `states[0]` is the
/// initial noise and `states[i]` follows `indices[i-1]`'s update.
#[derive(Debug, Clone)]
pub struct AncestralTrace {
    pub indices: Vec<usize>,
    pub states: Vec<Vec<f64>>,
}

pub fn ancestral_path<V: VectorField>(
    model: &V,
    schedule: &NoiseSchedule,
    c: &ConditionVector,
    dim: usize,
    nfe: usize,
    rng: &mut Seeded,
) -> Result<AncestralTrace> {
    if dim == 0 {
        return Err(Error::contract("dim must be positive"));
    }
    let indices = strided_timesteps(schedule.t_count(), nfe)?;
    let mut x = rng::standard_normal_vec(rng, dim);
    let mut states = vec![x.clone()];

    for (pos, &t) in indices.iter().enumerate() {
        let abar_t = schedule.alpha_bar[t];
        let abar_prev = match indices.get(pos + 1) {
            Some(&prev) => schedule.alpha_bar[prev],
            None => 1.0,
        };
        let beta_eff = 1.0 - abar_t / abar_prev;
        let eps_hat = model.eval(&x, c, schedule.normalized_time(t))?;
        if eps_hat.len() != dim {
            return Err(Error::contract("model output length mismatch"));
        }
        let inv = 1.0 / (1.0 - beta_eff).sqrt();
        let coef = beta_eff / (1.0 - abar_t).sqrt();
        for (xv, ev) in x.iter_mut().zip(&eps_hat) {
            *xv = inv * (*xv - coef * ev);
        }
        let sigma2 = (1.0 - abar_prev) / (1.0 - abar_t) * beta_eff;
        if sigma2 > 0.0 {
            let sigma = sigma2.sqrt();
            for xv in x.iter_mut() {
                *xv += sigma * rng::standard_normal(rng);
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "ddpm state".into(),
                step: pos + 1,
            });
        }
        states.push(x.clone());
    }
    Ok(AncestralTrace { indices, states })
}

/// Final state of one ancestral walk.
pub fn ancestral_sample<V: VectorField>(
    model: &V,
    schedule: &NoiseSchedule,
    c: &ConditionVector,
    dim: usize,
    nfe: usize,
    rng: &mut Seeded,
) -> Result<Vec<f64>> {
    let mut trace = ancestral_path(model, schedule, c, dim, nfe, rng)?;
    Ok(trace.states.pop().expect("trace has the initial state"))
}

/// One sample per condition; element `i` derives its noise stream from
/// `child_seed(seed, "ddpm-init", i)`, so results are identical for any
/// thread count.
pub fn ancestral_batch<V: VectorField + Sync>(
    model: &V,
    schedule: &NoiseSchedule,
    conditions: &[ConditionVector],
    dim: usize,
    nfe: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    parallel_map_indexed(conditions.len(), threads, |i| {
        let mut r = rng::seeded(rng::child_seed(seed, "ddpm-init", i as u64));
        ancestral_sample(model, schedule, &conditions[i], dim, nfe, &mut r)
    })
}

/// One noise-prediction training step: for each item draw a timestep
/// and a noise vector, noise the clean signal, and regress the model
/// output onto the drawn noise.
pub fn ddpm_train_step(
    model: &VelocityModel,
    schedule: &NoiseSchedule,
    batch: &[(&[f64], &ConditionVector)],
    rng: &mut Seeded,
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::contract("ddpm_train_step needs a non-empty batch"));
    }
    let mut staged = Vec::with_capacity(batch.len());
    for (x0, c) in batch {
        let t = rng.random_range(0..schedule.t_count());
        let eps = rng::standard_normal_vec(rng, x0.len());
        let xt = q_sample(x0, schedule.alpha_bar[t], &eps)?;
        staged.push((xt, schedule.normalized_time(t), eps, *c));
    }
    let items: Vec<TrainItem> = staged
        .iter()
        .map(|(xt, tn, eps, c)| TrainItem {
            x: xt,
            condition: *c,
            t: *tn,
            target: eps,
        })
        .collect();
    model.backward(&items)
}

/// Train a noise-prediction model on a labeled dataset. Returns the
/// checkpoint and the per-step loss trace.
pub fn train_ddpm(
    ds: &LabeledDataset,
    spec: ScheduleSpec,
    tc: &TrainConfig,
) -> Result<(Checkpoint, Vec<f64>)> {
    tc.validate()?;
    let schedule = spec.build()?;
    let cfg = ModelConfig {
        channels: ds.channels(),
        samples: ds.samples(),
        sample_rate_hz: ds.sample_rate_hz(),
        condition_dim: ds.condition_dim(),
        time_embed_width: tc.time_embed_width,
        hidden_sizes: tc.hidden_sizes.clone(),
    };
    let mut model = VelocityModel::init(cfg, rng::child_seed(tc.seed, "ddpm-model", 0))?;
    let mut rng = rng::seeded(rng::child_seed(tc.seed, "ddpm-train", 0));
    let mut adam = AdamState::new(&model, tc.adam);
    let mut ema = EmaState::new(&model, tc.ema_decay)?;
    let mut trace = Vec::with_capacity(tc.steps);
    for step in 0..tc.steps {
        let batch: Vec<(&[f64], &ConditionVector)> = (0..tc.batch_size)
            .map(|_| {
                let i = rng.random_range(0..ds.len());
                (ds.signal(i).data(), ds.condition(i))
            })
            .collect();
        let (grads, loss) = ddpm_train_step(&model, &schedule, &batch, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                quantity: "ddpm training loss".into(),
                step,
            });
        }
        adam_step(&mut model, &grads, &mut adam)?;
        ema.update(&model);
        trace.push(loss);
    }
    ema.write_into(&mut model);
    if !model.is_finite() {
        return Err(Error::NonFinite {
            quantity: "ddpm weights".into(),
            step: tc.steps,
        });
    }
    Ok((
        Checkpoint {
            method: Method::Ddpm,
            model,
            adam: tc.adam,
            schedule: Some(spec),
        },
        trace,
    ))
}
