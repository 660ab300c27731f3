use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{Actor, AgentAction, AgentNets, Learner};
use super::losses::Batch;
use super::replay::{Experience, ReplayBuffer};
use super::TrainConfig;
use crate::channel_env::{Decision, DeliveryEvent, Environment, ScenarioConfig};
use crate::error::Result;
use crate::mdp::{Observation, RewardWeights, StepOutcome, V2xMdp};
use crate::rng::{self, Rng};

/// Per-episode summary, one CSV row in training logs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub v2i_sum_rate_mbps: f64,
    pub v2v_fail_prob: f64,
    pub mean_reward: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeMetrics>,
    /// Update counts at which the Q target was hard-copied.
    pub hard_copy_steps: Vec<u64>,
    pub updates: u64,
}

pub fn decision_from(actions: &[AgentAction]) -> Decision {
    Decision {
        subband: actions.iter().map(|a| a.subband).collect(),
        power_w: actions.iter().map(|a| a.power_w).collect(),
    }
}

#[derive(Default)]
struct Tally {
    slots: usize,
    rate_sum: f64,
    reward_sum: f64,
    reward_count: usize,
    attempts: usize,
    failures: usize,
}

impl Tally {
    fn add(&mut self, out: &StepOutcome) {
        self.slots += 1;
        self.rate_sum += out.rates.v2i_sum_rate();
        self.reward_sum += out.rewards.iter().sum::<f64>();
        self.reward_count += out.rewards.len();
        for ev in &out.events {
            self.attempts += 1;
            if matches!(ev, DeliveryEvent::TimedOut { .. }) {
                self.failures += 1;
            }
        }
    }

    fn finish(&self, episode: u64, epsilon: f64) -> EpisodeMetrics {
        let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
        EpisodeMetrics {
            episode,
            v2i_sum_rate_mbps: ratio(self.rate_sum, self.slots) / 1e6,
            v2v_fail_prob: ratio(self.failures as f64, self.attempts),
            mean_reward: ratio(self.reward_sum, self.reward_count),
            epsilon,
        }
    }
}

pub(crate) fn act_all<A: Actor + ?Sized>(actor: &A, obs: &[Observation], epsilon: f64, explore: bool, rng: &mut Rng) -> Vec<AgentAction> {
    obs.iter().map(|o| actor.act(o, epsilon, explore, rng)).collect()
}

/// Runs one latency window with a fixed policy.
pub fn run_episode<A: Actor + ?Sized>(
    mdp: &mut V2xMdp,
    actor: &A,
    epsilon: f64,
    explore: bool,
    rng: &mut Rng,
    episode: u64,
) -> Result<EpisodeMetrics> {
    let mut tally = Tally::default();
    for _ in 0..mdp.env.config().window_slots() {
        let obs = mdp.observe_all();
        let actions = act_all(actor, &obs, epsilon, explore, rng);
        tally.add(&mdp.step(&decision_from(&actions))?);
    }
    Ok(tally.finish(episode, epsilon))
}

/// Pushes the slot's transitions of the agents that were transmitting
/// (`active[k]`). Idle agents' actions have no effect and are not stored.
pub(crate) fn store_slot(
    buffer: &mut ReplayBuffer<Experience>,
    obs: Vec<Observation>,
    actions: &[AgentAction],
    active: &[bool],
    out: &StepOutcome,
    slot: u64,
) {
    for (k, (o, a)) in obs.into_iter().zip(actions).enumerate() {
        if !active[k] {
            continue;
        }
        buffer.push(Experience {
            state: o.0,
            action: a.action,
            power_w: a.power_w,
            reward: out.rewards[k],
            next_state: out.next_observations[k].0.clone(),
            agent_id: k,
            slot_index: slot,
        });
    }
}

pub(crate) fn active_links(mdp: &V2xMdp) -> Vec<bool> {
    let p = mdp.env.payloads();
    (0..mdp.num_agents()).map(|k| p.is_active(k)).collect()
}

/// The shared training loop: every slot each agent acts with exploration,
/// all transitions go to one buffer, and once the buffer holds a batch the
/// learner takes `updates_per_slot` mini-batch steps.
pub fn run_training<L: Learner>(mdp: &mut V2xMdp, learner: &mut L, cfg: &TrainConfig, seed: u64) -> Result<TrainLog> {
    cfg.validate()?;
    let mut policy_rng = rng::stream(seed, rng::tag::POLICY);
    let mut replay_rng = rng::stream(seed, rng::tag::REPLAY);
    let mut buffer: ReplayBuffer<Experience> = ReplayBuffer::new(cfg.replay_capacity);
    let mut log = TrainLog::default();
    mdp.begin_episode();
    for episode in 0..cfg.episodes {
        if episode > 0 && episode % cfg.layout_period == 0 {
            mdp.env.relayout()?;
            mdp.begin_episode();
        }
        let epsilon = cfg.epsilon(episode);
        let mut tally = Tally::default();
        for _ in 0..mdp.env.config().window_slots() {
            let slot = mdp.env.slot();
            let obs = mdp.observe_all();
            let actions = act_all(&*learner, &obs, epsilon, true, &mut policy_rng);
            let active = active_links(mdp);
            let out = mdp.step(&decision_from(&actions))?;
            tally.add(&out);
            store_slot(&mut buffer, obs, &actions, &active, &out, slot);
            for _ in 0..cfg.updates_per_slot {
                let Some(idx) = buffer.sample_indices(cfg.batch_size, &mut replay_rng) else {
                    break;
                };
                let batch = Batch::from_experiences(idx.into_iter().map(|i| buffer.get(i)));
                if learner.update(&batch, cfg)?.hard_copy {
                    log.hard_copy_steps.push(learner.updates());
                }
            }
        }
        log.episodes.push(tally.finish(episode, epsilon));
    }
    log.updates = learner.updates();
    Ok(log)
}

/// Algorithm 1 for the combined DQN/DDPG agent.
pub fn run_algorithm1(mdp: &mut V2xMdp, nets: &mut AgentNets, cfg: &TrainConfig, seed: u64) -> Result<TrainLog> {
    nets.noise_variance = cfg.noise_variance;
    run_training(mdp, nets, cfg, seed)
}

/// Greedy evaluation: episode `e` runs in a fresh environment seeded from
/// `(eval_seed, e)`, so different policies see identical channels.
pub fn evaluate<A: Actor + Sync + ?Sized>(
    actor: &A,
    scenario: &ScenarioConfig,
    weights: RewardWeights,
    eval_seed: u64,
    episodes: u64,
) -> Result<Vec<EpisodeMetrics>> {
    // Episodes are independent; collect keeps them in episode order.
    (0..episodes)
        .into_par_iter()
        .map(|e| {
            let seed = rng::derive_seed(eval_seed, e);
            let mut mdp = V2xMdp::new(Environment::build(scenario, seed)?, weights);
            let mut policy_rng = rng::stream(seed, rng::tag::POLICY);
            run_episode(&mut mdp, actor, 0.0, false, &mut policy_rng, e)
        })
        .collect()
}

/// Means of the two headline metrics and the reward.
pub fn summarize(episodes: &[EpisodeMetrics]) -> (f64, f64, f64) {
    let n = episodes.len().max(1) as f64;
    let sum = |f: fn(&EpisodeMetrics) -> f64| episodes.iter().map(f).sum::<f64>() / n;
    (
        sum(|m| m.v2i_sum_rate_mbps),
        sum(|m| m.v2v_fail_prob),
        sum(|m| m.mean_reward),
    )
}
