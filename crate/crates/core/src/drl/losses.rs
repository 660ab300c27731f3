//! TD and policy losses with exact gradients and Hessian-vector products.
//!
//! All losses are means over the mini-batch. Target networks only enter
//! through the regression targets and never receive gradient.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use super::replay::Experience;
use crate::neuralnet::ParamSet;

/// A mini-batch laid out for batched forward passes.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub powers_w: Vec<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_experiences<'a, I>(items: I) -> Self
    where
        I: IntoIterator<Item = &'a Experience>,
    {
        let items: Vec<&Experience> = items.into_iter().collect();
        assert!(!items.is_empty(), "empty batch");
        let dim = items[0].state.len();
        let mut states = Array2::zeros((items.len(), dim));
        let mut next_states = Array2::zeros((items.len(), dim));
        for (i, e) in items.iter().enumerate() {
            states.row_mut(i).assign(&ArrayView2::from_shape((1, dim), &e.state).unwrap().row(0));
            next_states
                .row_mut(i)
                .assign(&ArrayView2::from_shape((1, dim), &e.next_state).unwrap().row(0));
        }
        Batch {
            states,
            actions: items.iter().map(|e| e.action).collect(),
            powers_w: items.iter().map(|e| e.power_w).collect(),
            rewards: items.iter().map(|e| e.reward).collect(),
            next_states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: ParamSet,
}

/// Critic input: state followed by the power action normalized by `p_max`.
pub fn critic_input(states: ArrayView2<'_, f64>, powers_w: &[f64], p_max: f64) -> Array2<f64> {
    let a = Array2::from_shape_fn((powers_w.len(), 1), |(i, _)| powers_w[i] / p_max);
    concatenate(Axis(1), &[states, a.view()]).expect("matching rows")
}

/// r + gamma * max_a Q_target(s', a).
pub fn dqn_targets(q_target: &ParamSet, batch: &Batch, gamma: f64) -> Array1<f64> {
    let next = q_target.predict(batch.next_states.view());
    let max = next.map_axis(Axis(1), |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    &batch.rewards + &(max * gamma)
}

/// Mean squared TD error of the Q network on the taken discrete actions.
pub fn dqn_loss_grad(q: &ParamSet, q_target: &ParamSet, batch: &Batch, gamma: f64) -> LossGrad {
    let y = dqn_targets(q_target, batch, gamma);
    let cache = q.forward(batch.states.view());
    let n = batch.len() as f64;
    let mut dout = Array2::zeros(cache.output.raw_dim());
    let mut loss = 0.0;
    for (i, &a) in batch.actions.iter().enumerate() {
        let err = cache.output[[i, a]] - y[i];
        loss += err * err;
        dout[[i, a]] = 2.0 * err / n;
    }
    let (grad, _) = q.backward(&cache, dout.view());
    LossGrad { loss: loss / n, grad }
}

/// Hessian of the DQN loss (in the Q parameters) applied to `v`.
pub fn dqn_hvp(q: &ParamSet, q_target: &ParamSet, batch: &Batch, gamma: f64, v: &ParamSet) -> ParamSet {
    let y = dqn_targets(q_target, batch, gamma);
    let cache = q.forward(batch.states.view());
    let rc = q.forward_r(&cache, None, Some(v));
    let n = batch.len() as f64;
    let mut dout = Array2::zeros(cache.output.raw_dim());
    let mut r_dout = Array2::zeros(cache.output.raw_dim());
    for (i, &a) in batch.actions.iter().enumerate() {
        dout[[i, a]] = 2.0 * (cache.output[[i, a]] - y[i]) / n;
        r_dout[[i, a]] = 2.0 * rc.r_output[[i, a]] / n;
    }
    q.backward_r(&cache, &rc, dout.view(), r_dout.view(), Some(v)).r_grad
}

/// r + gamma * Q_c'(s', pi'(s')).
pub fn critic_targets(actor_target: &ParamSet, critic_target: &ParamSet, batch: &Batch, gamma: f64, p_max: f64) -> Array1<f64> {
    let next_a = actor_target.predict(batch.next_states.view());
    let next_p: Vec<f64> = next_a.column(0).to_vec();
    let input = critic_input(batch.next_states.view(), &next_p, p_max);
    let q_next = critic_target.predict(input.view());
    &batch.rewards + &(q_next.column(0).to_owned() * gamma)
}

/// Mean squared error of the critic against the frozen DDPG target.
pub fn critic_loss_grad(
    critic: &ParamSet,
    actor_target: &ParamSet,
    critic_target: &ParamSet,
    batch: &Batch,
    gamma: f64,
    p_max: f64,
) -> LossGrad {
    let y = critic_targets(actor_target, critic_target, batch, gamma, p_max);
    let input = critic_input(batch.states.view(), &batch.powers_w, p_max);
    let cache = critic.forward(input.view());
    let n = batch.len() as f64;
    let err = &cache.output.column(0) - &y;
    let loss = err.mapv(|e| e * e).sum() / n;
    let dout = err.mapv(|e| 2.0 * e / n).insert_axis(Axis(1));
    let (grad, _) = critic.backward(&cache, dout.view());
    LossGrad { loss, grad }
}

pub fn critic_hvp(
    critic: &ParamSet,
    actor_target: &ParamSet,
    critic_target: &ParamSet,
    batch: &Batch,
    gamma: f64,
    p_max: f64,
    v: &ParamSet,
) -> ParamSet {
    let y = critic_targets(actor_target, critic_target, batch, gamma, p_max);
    let input = critic_input(batch.states.view(), &batch.powers_w, p_max);
    let cache = critic.forward(input.view());
    let rc = critic.forward_r(&cache, None, Some(v));
    let n = batch.len() as f64;
    let err = &cache.output.column(0) - &y;
    let dout = err.mapv(|e| 2.0 * e / n).insert_axis(Axis(1));
    let r_dout = rc.r_output.mapv(|r| 2.0 * r / n);
    critic
        .backward_r(&cache, &rc, dout.view(), r_dout.view(), Some(v))
        .r_grad
}

/// -mean Q_c(s, pi(s)) with the critic held fixed.
pub fn actor_loss_grad(actor: &ParamSet, critic: &ParamSet, batch: &Batch, p_max: f64) -> LossGrad {
    let a_cache = actor.forward(batch.states.view());
    let powers: Vec<f64> = a_cache.output.column(0).to_vec();
    let input = critic_input(batch.states.view(), &powers, p_max);
    let c_cache = critic.forward(input.view());
    let n = batch.len() as f64;
    let loss = -c_cache.output.sum() / n;
    let dq = Array2::from_elem((batch.len(), 1), -1.0 / n);
    let (_, d_input) = critic.backward(&c_cache, dq.view());
    let last = d_input.ncols() - 1;
    let d_action = d_input.slice(s![.., last..]).mapv(|g| g / p_max);
    let (grad, _) = actor.backward(&a_cache, d_action.view());
    LossGrad { loss, grad }
}

pub fn actor_hvp(actor: &ParamSet, critic: &ParamSet, batch: &Batch, p_max: f64, v: &ParamSet) -> ParamSet {
    let a_cache = actor.forward(batch.states.view());
    let a_rc = actor.forward_r(&a_cache, None, Some(v));
    let powers: Vec<f64> = a_cache.output.column(0).to_vec();
    let input = critic_input(batch.states.view(), &powers, p_max);
    let c_cache = critic.forward(input.view());
    let mut x_dir = Array2::zeros(input.raw_dim());
    let last = input.ncols() - 1;
    x_dir
        .slice_mut(s![.., last..])
        .assign(&a_rc.r_output.mapv(|r| r / p_max));
    let c_rc = critic.forward_r(&c_cache, Some(x_dir.view()), None);
    let n = batch.len() as f64;
    let dq = Array2::from_elem((batch.len(), 1), -1.0 / n);
    let r_dq = Array2::zeros((batch.len(), 1));
    let cb = critic.backward_r(&c_cache, &c_rc, dq.view(), r_dq.view(), None);
    let d_action = cb.input_grad.slice(s![.., last..]).mapv(|g| g / p_max);
    let r_d_action = cb.r_input_grad.slice(s![.., last..]).mapv(|g| g / p_max);
    actor
        .backward_r(&a_cache, &a_rc, d_action.view(), r_d_action.view(), Some(v))
        .r_grad
}
