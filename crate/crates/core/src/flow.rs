//! Flow-matching training on the linear noise-to-data path.
//!
//! A sample pairs noise `x0` with a data point `x1`; the path point is
//! `x_t = (1-t) x0 + t x1` and the regression target is the constant
//! path velocity `x1 - x0`. Training minimizes the mean squared error
//! between the model field and that velocity. Sampling integrates the
//! learned field from noise at t=0 to t=1 with a fixed evaluation
//! budget.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, Checkpoint, EmaState, Gradients, Method, ModelConfig, TrainConfig,
    TrainItem, VelocityModel};
use crate::rng::{self, Seeded};
use crate::signal::{ConditionVector, LabeledDataset};

/// `(1-t) x0 + t x1`, exact at both endpoints.
pub fn interpolate(x0: &[f64], x1: &[f64], t: f64) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::contract("interpolate: endpoint lengths differ"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::contract(format!("interpolate: t = {t} outside [0, 1]")));
    }
    Ok(x0
        .iter()
        .zip(x1)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect())
}

/// The linear path's velocity, `x1 - x0`; constant in t.
pub fn target_velocity(x0: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::contract("target_velocity: endpoint lengths differ"));
    }
    Ok(x0.iter().zip(x1).map(|(a, b)| b - a).collect())
}

/// One endpoint pair with its conditioning and time draw.
#[derive(Debug, Clone, Copy)]
pub struct PathItem<'a> {
    pub x0: &'a [f64],
    pub x1: &'a [f64],
    pub condition: &'a ConditionVector,
    pub t: f64,
}

/// A noise-to-data interpolation path: where it is at time t and how
/// fast it moves. Kept as a trait so the regression objective below is
/// written once against the general form.
pub trait ProbPath {
    fn point(&self, x0: &[f64], x1: &[f64], t: f64) -> Vec<f64>;
    fn velocity(&self, x0: &[f64], x1: &[f64], t: f64) -> Vec<f64>;
}

/// The linear path, written in the `x0 + t (x1 - x0)` form.
pub struct LinearPath;

impl ProbPath for LinearPath {
    fn point(&self, x0: &[f64], x1: &[f64], t: f64) -> Vec<f64> {
        x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect()
    }

    fn velocity(&self, x0: &[f64], x1: &[f64], _t: f64) -> Vec<f64> {
        x0.iter().zip(x1).map(|(a, b)| b - a).collect()
    }
}

/// Training loss of a batch through the same code path the trainer
/// uses (interpolate, constant target, backward pass).
pub fn fm_loss(model: &VelocityModel, items: &[PathItem]) -> Result<f64> {
    let mut staged = Vec::with_capacity(items.len());
    for it in items {
        staged.push((
            interpolate(it.x0, it.x1, it.t)?,
            target_velocity(it.x0, it.x1)?,
        ));
    }
    let train_items: Vec<TrainItem> = items
        .iter()
        .zip(&staged)
        .map(|(it, (xt, v))| TrainItem {
            x: xt,
            condition: it.condition,
            t: it.t,
            target: v,
        })
        .collect();
    Ok(model.backward(&train_items)?.1)
}

/// The same objective written against the general path form, forward
/// passes only: mean over items and elements of
/// `(model(path.point(x0, x1, t), c, t) - path.velocity(x0, x1, t))^2`.
pub fn path_regression_loss<P: ProbPath>(
    model: &VelocityModel,
    path: &P,
    items: &[PathItem],
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::contract("path_regression_loss needs items"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for it in items {
        let xt = path.point(it.x0, it.x1, it.t);
        let v = path.velocity(it.x0, it.x1, it.t);
        let out = model.forward(&xt, it.condition, it.t)?;
        for (o, tv) in out.iter().zip(&v) {
            let r = o - tv;
            total += r * r;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// One velocity-regression training step: for each data point draw a
/// time and a noise endpoint, then regress the model field at the path
/// point onto the path velocity.
pub fn fm_train_step(
    model: &VelocityModel,
    batch: &[(&[f64], &ConditionVector)],
    rng: &mut Seeded,
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::contract("fm_train_step needs a non-empty batch"));
    }
    let mut staged = Vec::with_capacity(batch.len());
    for (x1, c) in batch {
        let t = rng::uniform01(rng);
        let x0 = rng::standard_normal_vec(rng, x1.len());
        let xt = interpolate(&x0, x1, t)?;
        let v = target_velocity(&x0, x1)?;
        staged.push((xt, t, v, *c));
    }
    let items: Vec<TrainItem> = staged
        .iter()
        .map(|(xt, t, v, c)| TrainItem {
            x: xt,
            condition: *c,
            t: *t,
            target: v,
        })
        .collect();
    model.backward(&items)
}

/// Train a velocity-field model on a labeled dataset. Returns the
/// checkpoint and the per-step loss trace.
pub fn train_flow(ds: &LabeledDataset, tc: &TrainConfig) -> Result<(Checkpoint, Vec<f64>)> {
    tc.validate()?;
    let cfg = ModelConfig {
        channels: ds.channels(),
        samples: ds.samples(),
        sample_rate_hz: ds.sample_rate_hz(),
        condition_dim: ds.condition_dim(),
        time_embed_width: tc.time_embed_width,
        hidden_sizes: tc.hidden_sizes.clone(),
    };
    let mut model = VelocityModel::init(cfg, rng::child_seed(tc.seed, "fm-model", 0))?;
    let mut rng = rng::seeded(rng::child_seed(tc.seed, "fm-train", 0));
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
        let (grads, loss) = fm_train_step(&model, &batch, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                quantity: "fm training loss".into(),
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
            quantity: "fm weights".into(),
            step: tc.steps,
        });
    }
    Ok((
        Checkpoint {
            method: Method::FlowMatching,
            model,
            adam: tc.adam,
            schedule: None,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::MultiLeadSignal;
    use crate::synth::{synth_dataset, SynthSpec};

    #[test]
    fn interpolation_endpoints_are_exact() {
        let x0 = vec![0.3, -1.7, 2.0];
        let x1 = vec![1.1, 0.4, -0.9];
        assert_eq!(interpolate(&x0, &x1, 0.0).unwrap(), x0);
        assert_eq!(interpolate(&x0, &x1, 1.0).unwrap(), x1);
        for (got, want) in interpolate(&x0, &x1, 0.5)
            .unwrap()
            .iter()
            .zip(&[0.7, -0.65, 0.55])
        {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_is_displacement() {
        let x0 = vec![1.0, 2.0];
        let x1 = vec![0.5, 3.5];
        assert_eq!(target_velocity(&x0, &x1).unwrap(), vec![-0.5, 1.5]);
        assert!(target_velocity(&x0, &[1.0]).is_err());
    }

    /// The training-path loss and the general-path loss are two
    /// written-out versions of the same objective; on identical items
    /// they must agree to floating-point noise.
    #[test]
    fn dual_loss_implementations_agree() {
        let cfg = ModelConfig {
            channels: 2,
            samples: 6,
            sample_rate_hz: 100.0,
            condition_dim: 3,
            time_embed_width: 4,
            hidden_sizes: vec![8, 7],
        };
        let m = crate::nn::testutil::randomized(cfg.clone(), 70);
        let mut r = rng::seeded(71);
        for trial in 0..5 {
            let n = 4;
            let x0s: Vec<Vec<f64>> = (0..n)
                .map(|_| rng::standard_normal_vec(&mut r, cfg.signal_dim()))
                .collect();
            let x1s: Vec<Vec<f64>> = (0..n)
                .map(|_| rng::standard_normal_vec(&mut r, cfg.signal_dim()))
                .collect();
            let cond = ConditionVector::new(vec![1, 0, 1]).unwrap();
            let ts: Vec<f64> = (0..n).map(|_| rng::uniform01(&mut r)).collect();
            let items: Vec<PathItem> = (0..n)
                .map(|i| PathItem {
                    x0: &x0s[i],
                    x1: &x1s[i],
                    condition: &cond,
                    t: ts[i],
                })
                .collect();
            let a = fm_loss(&m, &items).unwrap();
            let b = path_regression_loss(&m, &LinearPath, &items).unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                "trial {trial}: {a} vs {b}"
            );
        }
    }

    /// On an all-zero dataset the target is -x0, so a zero-initialized
    /// model's loss is a mean of squared standard normals.
    #[test]
    fn zero_model_loss_concentrates_at_one_on_zero_data() {
        let channels = 2;
        let samples = 32;
        let n = 32;
        let sig = MultiLeadSignal::with_default_names(
            vec![0.0; channels * samples],
            channels,
            samples,
            100.0,
        )
        .unwrap();
        let cond = ConditionVector::new(vec![1, 0]).unwrap();
        let ds = LabeledDataset::new(vec![sig; n], vec![cond; n]).unwrap();
        let model = VelocityModel::init(
            ModelConfig {
                channels,
                samples,
                sample_rate_hz: 100.0,
                condition_dim: 2,
                time_embed_width: 4,
                hidden_sizes: vec![8],
            },
            72,
        )
        .unwrap();
        let mut r = rng::seeded(73);
        let batch: Vec<(&[f64], &ConditionVector)> = (0..n)
            .map(|i| (ds.signal(i).data(), ds.condition(i)))
            .collect();
        let (_, loss) = fm_train_step(&model, &batch, &mut r).unwrap();
        assert!((loss - 1.0).abs() < 0.15, "loss {loss}");
    }

    #[test]
    fn short_training_run_reduces_loss() {
        let ds = synth_dataset(&SynthSpec {
            n_signals: 16,
            channels: 1,
            samples: 24,
            sample_rate_hz: 100.0,
            condition_dim: 2,
            rng_seed: 74,
            noise_std: 0.02,
            bumps_per_beat: 2,
            phase_levels: None,
        })
        .unwrap()
        .normalized();
        let tc = TrainConfig {
            steps: 300,
            batch_size: 8,
            hidden_sizes: vec![32],
            time_embed_width: 4,
            adam: crate::nn::AdamParams {
                lr: 2e-3,
                ..Default::default()
            },
            ema_decay: 0.99,
            seed: 75,
        };
        let (ckpt, trace) = train_flow(&ds, &tc).unwrap();
        assert_eq!(trace.len(), 300);
        assert_eq!(ckpt.method, Method::FlowMatching);
        assert!(ckpt.schedule.is_none());
        assert!(ckpt.model.is_finite());
        let head: f64 = trace[..30].iter().sum::<f64>() / 30.0;
        let tail: f64 = trace[270..].iter().sum::<f64>() / 30.0;
        assert!(tail < head, "loss did not improve: head {head}, tail {tail}");
    }
}
