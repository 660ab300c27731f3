use serde::{Deserialize, Serialize};

use super::objective::{outer_gradient, ActorObjective, CriticObjective, DqnObjective, OuterMode};
use super::{sample_tasks, MetaConfig, TaskSpec};
use crate::channel_env::{Environment, ScenarioConfig};
use crate::drl::losses::{actor_loss_grad, critic_loss_grad, dqn_loss_grad};
use crate::drl::train::{act_all, active_links, store_slot};
use crate::drl::{decision_from, AgentNets, Batch, Experience, ReplayBuffer, TrainConfig};
use crate::error::{Error, Result};
use crate::mdp::{RewardWeights, V2xMdp};
use crate::neuralnet::{adam_step, sgd_step, ParamSet};
use crate::rng::{self, Rng};

/// Exact outer gradients are refused for nets larger than this.
pub const EXACT_MAX_PARAMS: usize = 20_000;

/// Task-specific parameters after inner adaptation.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskNets {
    pub q: ParamSet,
    pub critic: ParamSet,
    pub actor: ParamSet,
}

/// One task's contribution to the outer update.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGrads {
    pub q: Vec<f64>,
    pub critic: Vec<f64>,
    pub actor: Vec<f64>,
    /// Query losses of the Q network, critic and actor.
    pub query_loss: [f64; 3],
}

impl TaskGrads {
    fn add(&mut self, other: &TaskGrads) {
        for (a, b) in [
            (&mut self.q, &other.q),
            (&mut self.critic, &other.critic),
            (&mut self.actor, &other.actor),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for i in 0..3 {
            self.query_loss[i] += other.query_loss[i];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchLoss {
    pub batch: u64,
    pub q_loss: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Task-slot pairs that contributed a query loss.
    pub contributions: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetaLog {
    pub batches: Vec<BatchLoss>,
    pub outer_steps: u64,
    pub tasks: Vec<Vec<TaskSpec>>,
}

fn check_exact(nets: &AgentNets, mode: OuterMode) -> Result<()> {
    if mode == OuterMode::Exact {
        let largest = [&nets.q, &nets.critic, &nets.actor]
            .iter()
            .map(|p| p.num_params())
            .max()
            .unwrap_or(0);
        if largest > EXACT_MAX_PARAMS {
            return Err(Error::Unsupported(format!(
                "exact outer gradients need Hessian products through {largest} parameters; the limit is {EXACT_MAX_PARAMS}"
            )));
        }
    }
    Ok(())
}

/// `inner_steps` gradient steps from the global parameters on the support
/// batch. The actor steps against the global critic.
pub fn inner_adapt(global: &AgentNets, support: &Batch, cfg: &MetaConfig, gamma: f64) -> Result<TaskNets> {
    let mut q = global.q.clone();
    let mut critic = global.critic.clone();
    let mut actor = global.actor.clone();
    for step in 0..cfg.inner_steps {
        let gq = dqn_loss_grad(&q, &global.q_target, support, gamma);
        let gc = critic_loss_grad(&critic, &global.actor_target, &global.critic_target, support, gamma, global.p_max);
        let ga = actor_loss_grad(&actor, &global.critic, support, global.p_max);
        for (loss, what) in [(gq.loss, "inner q loss"), (gc.loss, "inner critic loss"), (ga.loss, "inner actor loss")] {
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    what,
                    step: step as u64,
                });
            }
        }
        sgd_step(&mut q, &gq.grad, cfg.inner_lr_q, 1.0);
        sgd_step(&mut critic, &gc.grad, cfg.inner_lr_critic, 1.0);
        sgd_step(&mut actor, &ga.grad, cfg.inner_lr_actor, 1.0);
    }
    Ok(TaskNets { q, critic, actor })
}

/// Adapts on `support` and differentiates the query losses back to the
/// global parameters. The actor's query loss uses the adapted critic;
/// cross-network dependencies are treated as constants.
pub fn task_outer_grads(global: &AgentNets, support: &Batch, query: &Batch, cfg: &MetaConfig, gamma: f64) -> Result<TaskGrads> {
    check_exact(global, cfg.mode)?;
    let steps = cfg.inner_steps;
    let q = outer_gradient(
        &DqnObjective {
            template: &global.q,
            target: &global.q_target,
            batch: support,
            gamma,
        },
        &DqnObjective {
            template: &global.q,
            target: &global.q_target,
            batch: query,
            gamma,
        },
        &global.q.to_flat(),
        cfg.inner_lr_q,
        steps,
        cfg.mode,
        "q loss",
    )?;
    let critic_obj = |batch| CriticObjective {
        template: &global.critic,
        actor_target: &global.actor_target,
        critic_target: &global.critic_target,
        batch,
        gamma,
        p_max: global.p_max,
    };
    let c = outer_gradient(
        &critic_obj(support),
        &critic_obj(query),
        &global.critic.to_flat(),
        cfg.inner_lr_critic,
        steps,
        cfg.mode,
        "critic loss",
    )?;
    let adapted_critic = global.critic.with_flat(&c.adapted)?;
    let a = outer_gradient(
        &ActorObjective {
            template: &global.actor,
            critic: &global.critic,
            batch: support,
            p_max: global.p_max,
        },
        &ActorObjective {
            template: &global.actor,
            critic: &adapted_critic,
            batch: query,
            p_max: global.p_max,
        },
        &global.actor.to_flat(),
        cfg.inner_lr_actor,
        steps,
        cfg.mode,
        "actor loss",
    )?;
    Ok(TaskGrads {
        q: q.grad,
        critic: c.grad,
        actor: a.grad,
        query_loss: [q.query_loss, c.query_loss, a.query_loss],
    })
}

/// Adam step on the summed task gradients, then the usual target updates.
pub fn outer_update(global: &mut AgentNets, grads: &TaskGrads, cfg: &MetaConfig, train: &TrainConfig) -> Result<()> {
    let gq = global.q.with_flat(&grads.q)?;
    let gc = global.critic.with_flat(&grads.critic)?;
    let ga = global.actor.with_flat(&grads.actor)?;
    adam_step(&mut global.q, &gq, &mut global.q_opt, cfg.outer_lr_q);
    adam_step(&mut global.critic, &gc, &mut global.critic_opt, cfg.outer_lr_critic);
    adam_step(&mut global.actor, &ga, &mut global.actor_opt, cfg.outer_lr_actor);
    global.steps += 1;
    if !(global.q.is_finite() && global.critic.is_finite() && global.actor.is_finite()) {
        return Err(Error::Divergence {
            what: "meta parameters",
            step: global.steps,
        });
    }
    global.update_targets(train.tau, train.hard_update_period);
    Ok(())
}

struct TaskRun {
    mdp: V2xMdp,
    buffer: ReplayBuffer<Experience>,
    rng: Rng,
}

/// Meta-training: each batch samples tasks, runs them side by side with
/// the global policy, and after every slot applies one outer update from
/// all tasks whose memory can supply disjoint support and query sets.
pub fn run_meta_training(
    global: &mut AgentNets,
    tasks: &[TaskSpec],
    base: &ScenarioConfig,
    cfg: &MetaConfig,
    train: &TrainConfig,
    weights: RewardWeights,
    seed: u64,
) -> Result<MetaLog> {
    cfg.validate()?;
    train.validate()?;
    check_exact(global, cfg.mode)?;
    global.noise_variance = train.noise_variance;
    let mut task_rng = rng::stream(seed, rng::tag::TASKS);
    let mut draw_rng = rng::stream(seed, rng::tag::REPLAY);
    let mut log = MetaLog::default();
    for batch in 0..cfg.num_batches {
        let sampled = sample_tasks(tasks, cfg.tasks_per_batch, &mut task_rng)?;
        let mut runs = sampled
            .iter()
            .map(|t| {
                Ok(TaskRun {
                    mdp: V2xMdp::new(Environment::build(&t.scenario(base), t.seed)?, weights),
                    buffer: ReplayBuffer::new(cfg.task_replay_capacity),
                    rng: rng::stream(rng::derive_seed(t.seed, batch), rng::tag::POLICY),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let epsilon = cfg.acting_epsilon(batch);
        let mut totals = [0.0; 3];
        let mut contributions = 0u64;
        for _ in 0..cfg.slots_per_task {
            let mut acc: Option<TaskGrads> = None;
            for run in runs.iter_mut() {
                let slot = run.mdp.env.slot();
                let obs = run.mdp.observe_all();
                let actions = act_all(&*global, &obs, epsilon, true, &mut run.rng);
                let active = active_links(&run.mdp);
                let out = run.mdp.step(&decision_from(&actions))?;
                store_slot(&mut run.buffer, obs, &actions, &active, &out, slot);
                let Some((s_idx, q_idx)) = run.buffer.sample_disjoint(cfg.support_size, cfg.query_size, &mut draw_rng) else {
                    continue;
                };
                let support = Batch::from_experiences(s_idx.into_iter().map(|i| run.buffer.get(i)));
                let query = Batch::from_experiences(q_idx.into_iter().map(|i| run.buffer.get(i)));
                let g = task_outer_grads(global, &support, &query, cfg, train.gamma)?;
                match acc.as_mut() {
                    Some(a) => a.add(&g),
                    None => acc = Some(g),
                }
                contributions += 1;
            }
            if let Some(g) = acc {
                for i in 0..3 {
                    totals[i] += g.query_loss[i];
                }
                outer_update(global, &g, cfg, train)?;
                log.outer_steps += 1;
            }
        }
        let n = contributions.max(1) as f64;
        log.batches.push(BatchLoss {
            batch,
            q_loss: totals[0] / n,
            critic_loss: totals[1] / n,
            actor_loss: totals[2] / n,
            contributions,
        });
        log.tasks.push(sampled);
    }
    Ok(log)
}

/// Few-shot adaptation: `samples` slots in the new environment with the
/// noisy policy; once the memory holds a mini-batch, one plain gradient
/// step per slot with the inner learning rates. Targets stay at the
/// meta-initialization.
pub fn meta_adapt(
    meta_init: &AgentNets,
    scenario: &ScenarioConfig,
    env_seed: u64,
    samples: u64,
    cfg: &MetaConfig,
    train: &TrainConfig,
    weights: RewardWeights,
) -> Result<AgentNets> {
    let mut nets = meta_init.clone();
    nets.noise_variance = train.noise_variance;
    let mut mdp = V2xMdp::new(Environment::build(scenario, env_seed)?, weights);
    let mut buffer = ReplayBuffer::new(cfg.task_replay_capacity.max(cfg.adapt_batch_size));
    let mut policy_rng = rng::stream(env_seed, rng::tag::POLICY);
    let mut replay_rng = rng::stream(env_seed, rng::tag::REPLAY);
    for step in 0..samples {
        let slot = mdp.env.slot();
        let obs = mdp.observe_all();
        let actions = act_all(&nets, &obs, cfg.epsilon, true, &mut policy_rng);
        let active = active_links(&mdp);
        let out = mdp.step(&decision_from(&actions))?;
        store_slot(&mut buffer, obs, &actions, &active, &out, slot);
        let Some(idx) = buffer.sample_indices(cfg.adapt_batch_size, &mut replay_rng) else {
            continue;
        };
        let batch = Batch::from_experiences(idx.into_iter().map(|i| buffer.get(i)));
        let gq = dqn_loss_grad(&nets.q, &meta_init.q_target, &batch, train.gamma);
        let gc = critic_loss_grad(
            &nets.critic,
            &meta_init.actor_target,
            &meta_init.critic_target,
            &batch,
            train.gamma,
            nets.p_max,
        );
        let ga = actor_loss_grad(&nets.actor, &nets.critic, &batch, nets.p_max);
        if !(gq.loss.is_finite() && gc.loss.is_finite() && ga.loss.is_finite()) {
            return Err(Error::Divergence {
                what: "adaptation loss",
                step,
            });
        }
        sgd_step(&mut nets.q, &gq.grad, cfg.inner_lr_q, 1.0);
        sgd_step(&mut nets.critic, &gc.grad, cfg.inner_lr_critic, 1.0);
        sgd_step(&mut nets.actor, &ga.grad, cfg.inner_lr_actor, 1.0);
    }
    Ok(nets)
}
