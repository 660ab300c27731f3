//! Off-policy MAML over a set of V2X tasks and few-shot adaptation to a new
//! environment.

mod objective;
mod train;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::channel_env::{ScenarioConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub use objective::{
    adapt_trajectory, outer_gradient, ActorObjective, CriticObjective, DqnObjective, Objective, OuterGrad, OuterMode,
};
pub use train::{
    inner_adapt, meta_adapt, outer_update, run_meta_training, task_outer_grads, BatchLoss, MetaLog, TaskGrads,
    TaskNets, EXACT_MAX_PARAMS,
};

/// One task: a scenario and the seed fixing its initial vehicle positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub id: usize,
}

impl TaskSpec {
    /// `base` itself when the kinds match, otherwise the preset of this
    /// task's kind with the same link counts and payload.
    pub fn scenario(&self, base: &ScenarioConfig) -> ScenarioConfig {
        if base.kind == self.kind {
            return base.clone();
        }
        let mut cfg = ScenarioConfig::preset(self.kind, base.num_v2i, base.num_v2v);
        cfg.payload_bytes = base.payload_bytes;
        cfg
    }
}

/// `count` tasks of one scenario with distinct seeds.
pub fn task_set(kind: ScenarioKind, count: usize, seed: u64) -> Vec<TaskSpec> {
    (0..count)
        .map(|id| TaskSpec {
            kind,
            seed: rng::derive_seed(seed, id as u64),
            id,
        })
        .collect()
}

/// Uniform draw of `n` tasks: without replacement when the set is large
/// enough, with replacement otherwise.
pub fn sample_tasks(tasks: &[TaskSpec], n: usize, rng: &mut Rng) -> Result<Vec<TaskSpec>> {
    if tasks.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    if n <= tasks.len() {
        Ok(index::sample(rng, tasks.len(), n).into_iter().map(|i| tasks[i]).collect())
    } else {
        Ok((0..n).map(|_| tasks[rng.random_range(0..tasks.len())]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub tasks_per_batch: usize,
    pub num_batches: u64,
    pub task_set_size: usize,
    pub task_kind: ScenarioKind,
    pub inner_steps: usize,
    pub inner_lr_q: f64,
    pub inner_lr_critic: f64,
    pub inner_lr_actor: f64,
    pub outer_lr_q: f64,
    pub outer_lr_critic: f64,
    pub outer_lr_actor: f64,
    pub support_size: usize,
    pub query_size: usize,
    /// Environment slots each sampled task runs per batch.
    pub slots_per_task: u64,
    pub task_replay_capacity: usize,
    /// Meta-training explores with epsilon falling linearly from
    /// `epsilon_start` to `epsilon` over the first `epsilon_anneal_frac`
    /// of the batches. Adaptation uses `epsilon`.
    pub epsilon_start: f64,
    pub epsilon_anneal_frac: f64,
    pub epsilon: f64,
    pub adapt_batch_size: usize,
    pub mode: OuterMode,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            tasks_per_batch: 4,
            num_batches: 20,
            task_set_size: 500,
            task_kind: ScenarioKind::Urban,
            inner_steps: 1,
            inner_lr_q: 0.01,
            inner_lr_critic: 0.01,
            inner_lr_actor: 0.001,
            outer_lr_q: 0.001,
            outer_lr_critic: 0.001,
            outer_lr_actor: 0.0001,
            support_size: 8,
            query_size: 8,
            slots_per_task: 300,
            task_replay_capacity: 10_000,
            epsilon_start: 1.0,
            epsilon_anneal_frac: 0.8,
            epsilon: 0.1,
            adapt_batch_size: 4,
            mode: OuterMode::FirstOrder,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, message: &str| {
            Err(Error::Config {
                path: format!("meta.{path}"),
                message: message.to_string(),
            })
        };
        if self.inner_steps == 0 {
            return err("inner_steps", "must be at least 1");
        }
        for (name, v) in [
            ("inner_lr_q", self.inner_lr_q),
            ("inner_lr_critic", self.inner_lr_critic),
            ("inner_lr_actor", self.inner_lr_actor),
            ("outer_lr_q", self.outer_lr_q),
            ("outer_lr_critic", self.outer_lr_critic),
            ("outer_lr_actor", self.outer_lr_actor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(name, "learning rate must be positive");
            }
        }
        for (name, v) in [
            ("tasks_per_batch", self.tasks_per_batch),
            ("task_set_size", self.task_set_size),
            ("support_size", self.support_size),
            ("query_size", self.query_size),
            ("adapt_batch_size", self.adapt_batch_size),
        ] {
            if v == 0 {
                return err(name, "must be positive");
            }
        }
        if self.support_size + self.query_size > self.task_replay_capacity {
            return err("task_replay_capacity", "must hold a support and a query set");
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_anneal_frac", self.epsilon_anneal_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(name, "must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn acting_epsilon(&self, batch: u64) -> f64 {
        let horizon = self.epsilon_anneal_frac * self.num_batches as f64;
        if horizon <= 0.0 {
            return self.epsilon;
        }
        let t = (batch as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon - self.epsilon_start) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_seeds_are_unique() {
        let tasks = task_set(ScenarioKind::Urban, 500, 3);
        let mut seeds: Vec<u64> = tasks.iter().map(|t| t.seed).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 500);
    }

    #[test]
    fn empty_set_is_an_error() {
        let mut r = rng::stream(0, 0);
        assert!(matches!(sample_tasks(&[], 1, &mut r), Err(Error::EmptyTaskSet)));
    }

    #[test]
    fn oversampling_uses_replacement() {
        let tasks = task_set(ScenarioKind::Highway, 3, 1);
        let mut r = rng::stream(0, 0);
        assert_eq!(sample_tasks(&tasks, 10, &mut r).unwrap().len(), 10);
    }

    #[test]
    fn validation() {
        assert!(MetaConfig::default().validate().is_ok());
        let bad = MetaConfig {
            inner_steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
