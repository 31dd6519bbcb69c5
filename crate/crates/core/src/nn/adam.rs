//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::{Dense, Gradients, VelocityModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, shaped like the model.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub params: AdamParams,
    m: Vec<Dense>,
    v: Vec<Dense>,
    step: u64,
}

impl AdamState {
    pub fn new(model: &VelocityModel, params: AdamParams) -> Self {
        let zeros: Vec<Dense> = model
            .layers()
            .iter()
            .map(|l| Dense {
                rows: l.rows,
                cols: l.cols,
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect();
        Self {
            params,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected exponential moving average of the model parameters.
///
/// Constant-rate Adam leaves the weights wandering in a noise ball
/// around the optimum, and that wander shows up as high-frequency
/// jitter in the learned field. Averaging the trajectory removes most
/// of it. The running sums are divided by `1 - decay^step` on readout,
/// so short runs read as plain trajectory averages instead of being
/// dragged toward the initialization.
#[derive(Debug, Clone)]
pub struct EmaState {
    decay: f64,
    step: u64,
    layers: Vec<Dense>,
}

impl EmaState {
    /// `decay` in `[0, 1)`; 0 degenerates to "keep the last step".
    pub fn new(model: &VelocityModel, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::contract(format!(
                "ema decay {decay} outside [0, 1)"
            )));
        }
        let layers = model
            .layers()
            .iter()
            .map(|l| Dense {
                rows: l.rows,
                cols: l.cols,
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect();
        Ok(Self {
            decay,
            step: 0,
            layers,
        })
    }

    /// Folds the model's current parameters into the running average.
    pub fn update(&mut self, model: &VelocityModel) {
        self.step += 1;
        let d = self.decay;
        for (e, l) in self.layers.iter_mut().zip(model.layers()) {
            for (a, p) in e.w.iter_mut().zip(&l.w).chain(e.b.iter_mut().zip(&l.b)) {
                *a = d * *a + (1.0 - d) * p;
            }
        }
    }

    /// Writes the corrected average into `model`. No-op before the
    /// first `update`, when there is nothing to read yet.
    pub fn write_into(&self, model: &mut VelocityModel) {
        if self.step == 0 {
            return;
        }
        let correction = 1.0 - self.decay.powi(self.step.min(i32::MAX as u64) as i32);
        for (li, e) in self.layers.iter().enumerate() {
            let layer = &mut model.layers_mut()[li];
            for (p, a) in layer.w.iter_mut().zip(&e.w).chain(layer.b.iter_mut().zip(&e.b)) {
                *p = a / correction;
            }
        }
    }
}

fn update_slice(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    p: AdamParams,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= p.lr * m_hat / (v_hat.sqrt() + p.eps);
    }
}

/// One bias-corrected Adam update in place. Coordinate-wise:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
pub fn adam_step(
    model: &mut VelocityModel,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<()> {
    if grads.layers.len() != model.layers().len() {
        return Err(Error::contract("gradient shape does not match model"));
    }
    state.step += 1;
    let p = state.params;
    let bc1 = 1.0 - p.beta1.powi(state.step as i32);
    let bc2 = 1.0 - p.beta2.powi(state.step as i32);
    for (li, g) in grads.layers.iter().enumerate() {
        let layer = &mut model.layers_mut()[li];
        if g.rows != layer.rows || g.cols != layer.cols {
            return Err(Error::contract(format!(
                "gradient shape mismatch at layer {li}"
            )));
        }
        update_slice(
            &mut layer.w,
            &g.w,
            &mut state.m[li].w,
            &mut state.v[li].w,
            p,
            bc1,
            bc2,
        );
        update_slice(
            &mut layer.b,
            &g.b,
            &mut state.m[li].b,
            &mut state.v[li].b,
            p,
            bc1,
            bc2,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{randomized, small_cfg};
    use crate::nn::TrainItem;
    use crate::rng::{self};
    use crate::signal::ConditionVector;

    fn zero_grads(model: &VelocityModel) -> Gradients {
        Gradients {
            layers: model
                .layers()
                .iter()
                .map(|l| Dense {
                    rows: l.rows,
                    cols: l.cols,
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut m = randomized(small_cfg(), 50);
        let before = m.clone();
        let g = zero_grads(&m);
        let mut st = AdamState::new(&m, AdamParams::default());
        adam_step(&mut m, &g, &mut st).unwrap();
        assert_eq!(m, before);
        assert_eq!(st.step(), 1);
    }

    /// Every coordinate must follow the scalar Adam recurrence exactly;
    /// the expected trajectory is recomputed here independently.
    #[test]
    fn updates_match_scalar_recurrence() {
        let mut m = randomized(small_cfg(), 51);
        let n = m.param_count();
        let p = AdamParams {
            lr: 0.01,
            ..AdamParams::default()
        };
        let mut st = AdamState::new(&m, p);
        let mut r = rng::seeded(52);

        let mut theta: Vec<f64> = (0..n).map(|i| m.get_param(i)).collect();
        let mut om = vec![0.0; n];
        let mut ov = vec![0.0; n];

        for step in 1..=10u64 {
            let gvals = rng::standard_normal_vec(&mut r, n);
            let mut g = zero_grads(&m);
            // Pack the flat gradient into layer shapes via the same
            // (weights, then bias) order used by get_param.
            {
                let mut idx = 0;
                for l in &mut g.layers {
                    for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                        *v = gvals[idx];
                        idx += 1;
                    }
                }
            }
            adam_step(&mut m, &g, &mut st).unwrap();

            for i in 0..n {
                om[i] = p.beta1 * om[i] + (1.0 - p.beta1) * gvals[i];
                ov[i] = p.beta2 * ov[i] + (1.0 - p.beta2) * gvals[i] * gvals[i];
                let mh = om[i] / (1.0 - p.beta1.powi(step as i32));
                let vh = ov[i] / (1.0 - p.beta2.powi(step as i32));
                theta[i] -= p.lr * mh / (vh.sqrt() + p.eps);
            }
            for i in 0..n {
                assert!(
                    (m.get_param(i) - theta[i]).abs() < 1e-14,
                    "step {step} param {i}: {} vs {}",
                    m.get_param(i),
                    theta[i]
                );
            }
        }
    }

    #[test]
    fn ema_of_a_constant_trajectory_is_that_point() {
        for (seed, decay, updates) in [(60u64, 0.999, 5usize), (61, 0.9, 40), (62, 0.0, 3)] {
            let m = randomized(small_cfg(), seed);
            let mut ema = EmaState::new(&m, decay).unwrap();
            for _ in 0..updates {
                ema.update(&m);
            }
            let mut out = m.clone();
            ema.write_into(&mut out);
            for i in 0..m.param_count() {
                assert!(
                    (out.get_param(i) - m.get_param(i)).abs() < 1e-12,
                    "decay {decay}, param {i}"
                );
            }
        }
    }

    #[test]
    fn ema_decay_zero_keeps_the_last_parameters() {
        let a = randomized(small_cfg(), 63);
        let b = randomized(small_cfg(), 64);
        let mut ema = EmaState::new(&a, 0.0).unwrap();
        ema.update(&a);
        ema.update(&b);
        let mut out = a.clone();
        ema.write_into(&mut out);
        assert_eq!(out, b);
    }

    /// The corrected readout must equal the explicit geometric weight
    /// sum over the visited points, recomputed here per parameter.
    #[test]
    fn ema_matches_the_explicit_weighted_mean() {
        let decay = 0.95;
        let points: Vec<VelocityModel> =
            (0..4).map(|k| randomized(small_cfg(), 70 + k)).collect();
        let mut ema = EmaState::new(&points[0], decay).unwrap();
        for p in &points {
            ema.update(p);
        }
        let mut out = points[0].clone();
        ema.write_into(&mut out);

        let n = points.len();
        let correction = 1.0 - decay.powi(n as i32);
        for i in 0..out.param_count() {
            let mut want = 0.0;
            for (k, p) in points.iter().enumerate() {
                want += decay.powi((n - 1 - k) as i32) * (1.0 - decay) * p.get_param(i);
            }
            want /= correction;
            assert!(
                (out.get_param(i) - want).abs() < 1e-12,
                "param {i}: {} vs {want}",
                out.get_param(i)
            );
        }
    }

    #[test]
    fn ema_rejects_decay_outside_the_unit_interval() {
        let m = randomized(small_cfg(), 65);
        assert!(EmaState::new(&m, 1.0).is_err());
        assert!(EmaState::new(&m, -0.1).is_err());
        assert!(EmaState::new(&m, f64::NAN).is_err());
    }

    #[test]
    fn optimizing_a_fixed_target_decreases_loss() {
        let cfg = small_cfg();
        let mut m = randomized(cfg.clone(), 53);
        let mut r = rng::seeded(54);
        let x = rng::standard_normal_vec(&mut r, cfg.signal_dim());
        let target = rng::standard_normal_vec(&mut r, cfg.signal_dim());
        let c = ConditionVector::new(vec![1, 0, 0]).unwrap();
        let item = TrainItem {
            x: &x,
            condition: &c,
            t: 0.5,
            target: &target,
        };
        let p = AdamParams {
            lr: 0.02,
            ..AdamParams::default()
        };
        let mut st = AdamState::new(&m, p);
        let (_, first) = m.backward(&[item]).unwrap();
        for _ in 0..200 {
            let (g, _) = m.backward(&[item]).unwrap();
            adam_step(&mut m, &g, &mut st).unwrap();
        }
        let (_, last) = m.backward(&[item]).unwrap();
        assert!(
            last < first,
            "loss did not decrease: {first} -> {last}"
        );
        assert!(last < first * 0.5, "loss barely moved: {first} -> {last}");
    }
}
