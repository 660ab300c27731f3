use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::losses::{actor_loss_grad, critic_loss_grad, dqn_loss_grad, Batch};
use super::TrainConfig;
use crate::channel_env::{dbm_to_watts, watts_to_dbm};
use crate::error::{Error, Result};
use crate::mdp::Observation;
use crate::neuralnet::{adam_step, blend, layer_sizes, AdamState, Head, ParamSet};
use crate::rng::{self, Rng};

/// What one agent does in one slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    /// Index into the discrete head, stored in replay.
    pub action: usize,
    pub subband: usize,
    pub power_w: f64,
}

/// Lowest index among the maxima.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy over the Q head. One uniform draw is consumed whatever
/// epsilon is, a second one only when exploring.
pub fn select_subband(q: &ParamSet, obs: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..q.output_size())
    } else {
        argmax(&q.predict_one(obs))
    }
}

/// Actor output plus Gaussian noise of the given variance in units of
/// `p_max`, clamped to `[0, p_max]`.
pub fn select_power(actor: &ParamSet, obs: &[f64], noise_variance: f64, p_max: f64, explore: bool, rng: &mut Rng) -> f64 {
    let p = actor.predict_one(obs)[0];
    let eta = if explore && noise_variance > 0.0 {
        Normal::new(0.0, noise_variance.sqrt())
            .expect("finite variance")
            .sample(rng)
    } else {
        0.0
    };
    (p + eta * p_max).clamp(0.0, p_max)
}

/// Anything that maps an observation to an action.
pub trait Actor {
    fn act(&self, obs: &Observation, epsilon: f64, explore: bool, rng: &mut Rng) -> AgentAction;
}

/// An actor that also learns from replayed mini-batches.
pub trait Learner: Actor {
    fn update(&mut self, batch: &Batch, cfg: &TrainConfig) -> Result<UpdateStats>;
    fn updates(&self) -> u64;
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub q_loss: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub hard_copy: bool,
}

fn check_finite(value: f64, what: &'static str, step: u64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { what, step })
    }
}

pub const DEFAULT_NOISE_VARIANCE: f64 = 0.2;

/// Q network for the sub-band, actor and critic for the power, each with a
/// target copy and an Adam state. Shared by all agents.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNets {
    pub q: ParamSet,
    pub q_target: ParamSet,
    pub actor: ParamSet,
    pub actor_target: ParamSet,
    pub critic: ParamSet,
    pub critic_target: ParamSet,
    pub q_opt: AdamState,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub p_max: f64,
    /// Exploration noise variance in units of `p_max`.
    pub noise_variance: f64,
    pub steps: u64,
}

impl AgentNets {
    pub fn new(obs_len: usize, num_subbands: usize, hidden: &[usize], p_max: f64, seed: u64) -> Self {
        let q = ParamSet::init(
            &layer_sizes(obs_len, hidden, num_subbands),
            Head::Linear,
            rng::derive_seed(seed, 0),
        );
        let actor = ParamSet::init(
            &layer_sizes(obs_len, hidden, 1),
            Head::SigmoidScaled(p_max),
            rng::derive_seed(seed, 1),
        );
        let critic = ParamSet::init(
            &layer_sizes(obs_len + 1, hidden, 1),
            Head::Linear,
            rng::derive_seed(seed, 2),
        );
        Self::from_params(q, actor, critic, p_max)
    }

    /// Targets start as copies; optimizer state starts empty.
    pub fn from_params(q: ParamSet, actor: ParamSet, critic: ParamSet, p_max: f64) -> Self {
        AgentNets {
            q_target: q.clone(),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            q_opt: AdamState::new(&q),
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            q,
            actor,
            critic,
            p_max,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            steps: 0,
        }
    }

    pub fn num_subbands(&self) -> usize {
        self.q.output_size()
    }

    /// Hard copy of the Q target plus soft update of actor and critic
    /// targets, as done after every training step.
    pub fn update_targets(&mut self, tau: f64, hard_period: u64) -> bool {
        blend(&mut self.actor_target, &self.actor, tau);
        blend(&mut self.critic_target, &self.critic, tau);
        if hard_period > 0 && self.steps % hard_period == 0 {
            self.q_target = self.q.clone();
            true
        } else {
            false
        }
    }
}

impl Actor for AgentNets {
    fn act(&self, obs: &Observation, epsilon: f64, explore: bool, rng: &mut Rng) -> AgentAction {
        let eps = if explore { epsilon } else { 0.0 };
        let subband = select_subband(&self.q, obs.as_slice(), eps, rng);
        let power_w = select_power(&self.actor, obs.as_slice(), self.noise_variance, self.p_max, explore, rng);
        AgentAction {
            action: subband,
            subband,
            power_w,
        }
    }
}

impl Learner for AgentNets {
    fn update(&mut self, batch: &Batch, cfg: &TrainConfig) -> Result<UpdateStats> {
        let step = self.steps + 1;
        let q = dqn_loss_grad(&self.q, &self.q_target, batch, cfg.gamma);
        check_finite(q.loss, "q loss", step)?;
        let c = critic_loss_grad(
            &self.critic,
            &self.actor_target,
            &self.critic_target,
            batch,
            cfg.gamma,
            self.p_max,
        );
        check_finite(c.loss, "critic loss", step)?;
        let a = actor_loss_grad(&self.actor, &self.critic, batch, self.p_max);
        check_finite(a.loss, "actor loss", step)?;
        adam_step(&mut self.q, &q.grad, &mut self.q_opt, cfg.lr_q);
        adam_step(&mut self.critic, &c.grad, &mut self.critic_opt, cfg.lr_critic);
        adam_step(&mut self.actor, &a.grad, &mut self.actor_opt, cfg.lr_actor);
        if !(self.q.is_finite() && self.critic.is_finite() && self.actor.is_finite()) {
            return Err(Error::Divergence {
                what: "parameters",
                step,
            });
        }
        self.steps = step;
        let hard_copy = self.update_targets(cfg.tau, cfg.hard_update_period);
        Ok(UpdateStats {
            q_loss: q.loss,
            critic_loss: c.loss,
            actor_loss: a.loss,
            hard_copy,
        })
    }

    fn updates(&self) -> u64 {
        self.steps
    }
}

/// Power levels evenly spaced in dBm from `min_dbm` to `max_dbm`.
pub fn quantized_levels_dbm(min_dbm: f64, max_dbm: f64, levels: usize) -> Vec<f64> {
    assert!(levels >= 2);
    let step = (max_dbm - min_dbm) / (levels - 1) as f64;
    (0..levels).map(|i| min_dbm + step * i as f64).collect()
}

pub const QUANTIZED_MIN_DBM: f64 = -10.0;
pub const QUANTIZED_LEVELS: usize = 5;

/// DQN over the joint (sub-band, power level) action set.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedNets {
    pub q: ParamSet,
    pub q_target: ParamSet,
    pub q_opt: AdamState,
    pub levels_w: Vec<f64>,
    pub steps: u64,
}

impl QuantizedNets {
    pub fn new(obs_len: usize, num_subbands: usize, hidden: &[usize], p_max: f64, seed: u64) -> Self {
        let levels_w: Vec<f64> = quantized_levels_dbm(QUANTIZED_MIN_DBM, watts_to_dbm(p_max), QUANTIZED_LEVELS)
            .into_iter()
            .map(dbm_to_watts)
            .collect();
        let q = ParamSet::init(
            &layer_sizes(obs_len, hidden, num_subbands * levels_w.len()),
            Head::Linear,
            rng::derive_seed(seed, 0),
        );
        Self::from_params(q, levels_w)
    }

    pub fn from_params(q: ParamSet, levels_w: Vec<f64>) -> Self {
        QuantizedNets {
            q_target: q.clone(),
            q_opt: AdamState::new(&q),
            q,
            levels_w,
            steps: 0,
        }
    }

    pub fn decode(&self, action: usize) -> (usize, f64) {
        let l = self.levels_w.len();
        (action / l, self.levels_w[action % l])
    }
}

impl Actor for QuantizedNets {
    fn act(&self, obs: &Observation, epsilon: f64, explore: bool, rng: &mut Rng) -> AgentAction {
        let eps = if explore { epsilon } else { 0.0 };
        let action = select_subband(&self.q, obs.as_slice(), eps, rng);
        let (subband, power_w) = self.decode(action);
        AgentAction {
            action,
            subband,
            power_w,
        }
    }
}

impl Learner for QuantizedNets {
    fn update(&mut self, batch: &Batch, cfg: &TrainConfig) -> Result<UpdateStats> {
        let step = self.steps + 1;
        let q = dqn_loss_grad(&self.q, &self.q_target, batch, cfg.gamma);
        check_finite(q.loss, "q loss", step)?;
        adam_step(&mut self.q, &q.grad, &mut self.q_opt, cfg.lr_q);
        if !self.q.is_finite() {
            return Err(Error::Divergence {
                what: "parameters",
                step,
            });
        }
        self.steps = step;
        let hard_copy = cfg.hard_update_period > 0 && step % cfg.hard_update_period == 0;
        if hard_copy {
            self.q_target = self.q.clone();
        }
        Ok(UpdateStats {
            q_loss: q.loss,
            hard_copy,
            ..Default::default()
        })
    }

    fn updates(&self) -> u64 {
        self.steps
    }
}

/// Uniform sub-band and uniform power in `[0, p_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomPolicy {
    pub num_subbands: usize,
    pub p_max: f64,
}

impl Actor for RandomPolicy {
    fn act(&self, _obs: &Observation, _epsilon: f64, _explore: bool, rng: &mut Rng) -> AgentAction {
        let subband = rng.random_range(0..self.num_subbands);
        let power_w = rng.random::<f64>() * self.p_max;
        AgentAction {
            action: subband,
            subband,
            power_w,
        }
    }
}
