use serde::{Deserialize, Serialize};

use super::params::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ParamSet,
    pub v: ParamSet,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(like: &ParamSet) -> Self {
        AdamState {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
            config: AdamConfig::default(),
        }
    }
}

/// Bias-corrected Adam update applied in place.
pub fn adam_step(p: &mut ParamSet, grad: &ParamSet, st: &mut AdamState, lr: f64) {
    assert!(p.same_shape(grad) && p.same_shape(&st.m), "adam shape mismatch");
    st.step += 1;
    let AdamConfig { beta1, beta2, eps } = st.config;
    let c1 = 1.0 - beta1.powi(st.step as i32);
    let c2 = 1.0 - beta2.powi(st.step as i32);
    for (((w, g), m), v) in p
        .values_mut()
        .zip(grad.values())
        .zip(st.m.values_mut())
        .zip(st.v.values_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::Head;

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = ParamSet::init(&[3, 4, 2], Head::Linear, 1);
        let orig = p.clone();
        let mut st = AdamState::new(&p);
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut st, 0.1);
        assert_eq!(p, orig);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = ParamSet::init(&[3, 4, 2], Head::Linear, 1);
        let flat: Vec<f64> = (0..p.num_params())
            .map(|i| if i % 2 == 0 { 0.01 * (i + 1) as f64 } else { -0.003 * i as f64 })
            .collect();
        let g = p.with_flat(&flat).unwrap();
        let orig = p.clone();
        let mut st = AdamState::new(&p);
        let lr = 0.01;
        adam_step(&mut p, &g, &mut st, lr);
        for ((new, old), gi) in p.values().zip(orig.values()).zip(g.values()) {
            let expected = old - lr * gi.signum();
            assert!((new - expected).abs() < 1e-6, "{new} vs {expected}");
        }
    }

    #[test]
    fn state_matters() {
        let p0 = ParamSet::init(&[2, 2], Head::Linear, 1);
        let g = ParamSet::init(&[2, 2], Head::Linear, 2);
        let mut a = p0.clone();
        let mut sa = AdamState::new(&a);
        adam_step(&mut a, &g, &mut sa, 0.01);
        adam_step(&mut a, &g, &mut sa, 0.01);
        let mut b = p0.clone();
        let mut sb = AdamState::new(&b);
        adam_step(&mut b, &g, &mut sb, 0.02);
        assert_ne!(a, b);
    }
}
