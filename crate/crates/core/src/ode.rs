//! Fixed-step ODE integration over t in [0, 1].
//!
//! The integrators are budgeted by the number of field evaluations
//! (NFE), not by step count: Euler spends one evaluation per step,
//! midpoint two. That makes "same NFE" comparisons across methods an
//! equal-compute comparison by construction.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::nn::VelocityModel;
use crate::par::parallel_map_indexed;
use crate::rng;
use crate::signal::ConditionVector;

/// A conditioned, time-dependent vector field `dx/dt = f(x, c, t)`.
/// `Sync` is required only by [`batch_generate`].
pub trait VectorField {
    fn eval(&self, x: &[f64], c: &ConditionVector, t: f64) -> Result<Vec<f64>>;
}

impl VectorField for VelocityModel {
    fn eval(&self, x: &[f64], c: &ConditionVector, t: f64) -> Result<Vec<f64>> {
        self.forward(x, c, t)
    }
}

/// Adapter for closures, mostly for analytic fields in tests.
pub struct FnField<F>(pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &ConditionVector, f64) -> Vec<f64>,
{
    fn eval(&self, x: &[f64], c: &ConditionVector, t: f64) -> Result<Vec<f64>> {
        Ok((self.0)(x, c, t))
    }
}

/// Wrapper that counts field evaluations; the counter is shared and
/// thread-safe so batch sampling can be audited too.
pub struct CountedField<'a, V> {
    inner: &'a V,
    calls: &'a AtomicUsize,
}

impl<'a, V> CountedField<'a, V> {
    pub fn new(inner: &'a V, calls: &'a AtomicUsize) -> Self {
        Self { inner, calls }
    }
}

impl<V: VectorField> VectorField for CountedField<'_, V> {
    fn eval(&self, x: &[f64], c: &ConditionVector, t: f64) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x, c, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeMethod {
    Euler,
    Midpoint,
}

impl OdeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            OdeMethod::Euler => "euler",
            OdeMethod::Midpoint => "midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(OdeMethod::Euler),
            "midpoint" => Ok(OdeMethod::Midpoint),
            other => Err(Error::contract(format!(
                "unknown ode method {other:?}, expected \"euler\" or \"midpoint\""
            ))),
        }
    }
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            quantity: "ode state".into(),
            step,
        })
    }
}

/// Integrate from `x0` at t=0 to t=1 with exactly `nfe` field
/// evaluations. Euler takes `nfe` steps on the left-endpoint grid
/// {0, h, ..., 1-h}; midpoint takes `nfe/2` steps (`nfe` must be even)
/// evaluating at each step start and midpoint.
pub fn integrate_from<V: VectorField>(
    field: &V,
    x0: &[f64],
    c: &ConditionVector,
    method: OdeMethod,
    nfe: usize,
) -> Result<Vec<f64>> {
    if nfe == 0 {
        return Err(Error::contract("nfe must be at least 1"));
    }
    let mut x = x0.to_vec();
    check_finite(&x, 0)?;
    match method {
        OdeMethod::Euler => {
            let h = 1.0 / nfe as f64;
            for k in 0..nfe {
                let t = k as f64 * h;
                let v = field.eval(&x, c, t)?;
                if v.len() != x.len() {
                    return Err(Error::contract("field output length mismatch"));
                }
                for (xv, vv) in x.iter_mut().zip(&v) {
                    *xv += h * vv;
                }
                check_finite(&x, k + 1)?;
            }
        }
        OdeMethod::Midpoint => {
            if nfe % 2 != 0 {
                return Err(Error::contract(format!(
                    "midpoint needs an even nfe, got {nfe}"
                )));
            }
            let steps = nfe / 2;
            let h = 1.0 / steps as f64;
            for k in 0..steps {
                let t = k as f64 * h;
                let k1 = field.eval(&x, c, t)?;
                if k1.len() != x.len() {
                    return Err(Error::contract("field output length mismatch"));
                }
                let xm: Vec<f64> = x
                    .iter()
                    .zip(&k1)
                    .map(|(xv, vv)| xv + 0.5 * h * vv)
                    .collect();
                let k2 = field.eval(&xm, c, t + 0.5 * h)?;
                if k2.len() != x.len() {
                    return Err(Error::contract("field output length mismatch"));
                }
                for (xv, vv) in x.iter_mut().zip(&k2) {
                    *xv += h * vv;
                }
                check_finite(&x, k + 1)?;
            }
        }
    }
    Ok(x)
}

/// Generate one state per condition, integrating from standard normal
/// noise. The noise for element `i` is derived from `child_seed(seed,
/// "ode-init", i)`, so results are identical for any `threads` value
/// and depend only on (seed, index).
pub fn batch_generate<V: VectorField + Sync>(
    field: &V,
    conditions: &[ConditionVector],
    dim: usize,
    method: OdeMethod,
    nfe: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::contract("dim must be positive"));
    }
    parallel_map_indexed(conditions.len(), threads, |i| {
        let mut r = rng::seeded(rng::child_seed(seed, "ode-init", i as u64));
        let x0 = rng::standard_normal_vec(&mut r, dim);
        integrate_from(field, &x0, &conditions[i], method, nfe)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn cond() -> ConditionVector {
        ConditionVector::new(vec![1]).unwrap()
    }

    /// dx/dt = -x from x0 = 1 with 4 Euler evaluations contracts by
    /// exactly (1 - 1/4)^4; every intermediate value is a dyadic
    /// rational, so the comparison is exact.
    #[test]
    fn euler_decay_closed_form() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, _t: f64| vec![-x[0]]);
        let out = integrate_from(&f, &[1.0], &cond(), OdeMethod::Euler, 4).unwrap();
        assert_eq!(out[0], 0.31640625);
    }

    #[test]
    fn constant_field_is_integrated_exactly() {
        let f = FnField(|_x: &[f64], _c: &ConditionVector, _t: f64| vec![1.0, -2.0]);
        for &(m, nfe) in &[(OdeMethod::Euler, 8), (OdeMethod::Midpoint, 8)] {
            let out = integrate_from(&f, &[0.5, 0.5], &cond(), m, nfe).unwrap();
            assert_eq!(out, vec![1.5, -1.5]);
        }
    }

    /// Halving the step size should halve Euler's global error (first
    /// order) and quarter midpoint's (second order) on dx/dt = -x.
    #[test]
    fn convergence_orders_on_exponential_decay() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, _t: f64| vec![-x[0]]);
        let exact = (-1.0f64).exp();
        let run = |m, nfe| {
            let out = integrate_from(&f, &[1.0], &cond(), m, nfe).unwrap();
            (out[0] - exact).abs()
        };
        let e_ratio = run(OdeMethod::Euler, 128) / run(OdeMethod::Euler, 64);
        assert!(
            (0.45..=0.55).contains(&e_ratio),
            "euler error ratio {e_ratio}"
        );
        let m_ratio = run(OdeMethod::Midpoint, 128) / run(OdeMethod::Midpoint, 64);
        assert!(
            (0.2..=0.3).contains(&m_ratio),
            "midpoint error ratio {m_ratio}"
        );
    }

    #[test]
    fn evaluation_grid_is_left_endpoint() {
        let ts = RefCell::new(Vec::new());
        let f = FnField(|x: &[f64], _c: &ConditionVector, t: f64| {
            ts.borrow_mut().push(t);
            vec![0.0; x.len()]
        });
        integrate_from(&f, &[0.0], &cond(), OdeMethod::Euler, 4).unwrap();
        assert_eq!(*ts.borrow(), vec![0.0, 0.25, 0.5, 0.75]);

        ts.borrow_mut().clear();
        integrate_from(&f, &[0.0], &cond(), OdeMethod::Midpoint, 4).unwrap();
        assert_eq!(*ts.borrow(), vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn nfe_accounting_is_exact() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, _t: f64| vec![0.1; x.len()]);
        for &(m, nfe) in &[
            (OdeMethod::Euler, 1),
            (OdeMethod::Euler, 10),
            (OdeMethod::Midpoint, 2),
            (OdeMethod::Midpoint, 10),
        ] {
            let calls = AtomicUsize::new(0);
            let counted = CountedField::new(&f, &calls);
            integrate_from(&counted, &[0.0], &cond(), m, nfe).unwrap();
            assert_eq!(calls.load(Ordering::Relaxed), nfe);
        }
    }

    #[test]
    fn invalid_budgets_are_rejected() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, _t: f64| vec![0.0; x.len()]);
        assert!(integrate_from(&f, &[0.0], &cond(), OdeMethod::Euler, 0).is_err());
        assert!(integrate_from(&f, &[0.0], &cond(), OdeMethod::Midpoint, 5).is_err());
    }

    #[test]
    fn non_finite_states_name_the_step() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, t: f64| {
            if t >= 0.5 {
                vec![f64::NAN; x.len()]
            } else {
                vec![0.0; x.len()]
            }
        });
        let err = integrate_from(&f, &[0.0], &cond(), OdeMethod::Euler, 4).unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert_eq!(step, 3),
            other => panic!("expected NonFinite, got {other}"),
        }
    }

    #[test]
    fn batch_generation_is_thread_count_invariant() {
        let f = FnField(|x: &[f64], _c: &ConditionVector, _t: f64| {
            x.iter().map(|v| -v).collect()
        });
        let cs: Vec<ConditionVector> = (0..9).map(|_| cond()).collect();
        let a = batch_generate(&f, &cs, 6, OdeMethod::Euler, 16, 77, 1).unwrap();
        let b = batch_generate(&f, &cs, 6, OdeMethod::Euler, 16, 77, 4).unwrap();
        assert_eq!(a, b);
        let c = batch_generate(&f, &cs, 6, OdeMethod::Euler, 16, 78, 4).unwrap();
        assert_ne!(a, c);
    }
}
