//! Combined DQN (sub-band) and DDPG (power) agents, replay memory and the
//! training loop.

mod agent;
pub mod losses;
mod replay;
pub(crate) mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::DESK_HIDDEN;

pub use agent::{
    argmax, quantized_levels_dbm, select_power, select_subband, Actor, AgentAction, AgentNets, Learner,
    QuantizedNets, RandomPolicy, UpdateStats, DEFAULT_NOISE_VARIANCE, QUANTIZED_LEVELS, QUANTIZED_MIN_DBM,
};
pub use losses::{Batch, LossGrad};
pub use replay::{Experience, ReplayBuffer};
pub use train::{
    decision_from, evaluate, run_algorithm1, run_episode, run_training, summarize, EpisodeMetrics, TrainLog,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_q: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training episodes over which epsilon decays linearly.
    pub epsilon_anneal_frac: f64,
    /// Variance of the power exploration noise, in units of `P_max`.
    pub noise_variance: f64,
    pub hard_update_period: u64,
    pub episodes: u64,
    /// Vehicles are re-placed every this many episodes.
    pub layout_period: u64,
    /// Mini-batch updates per slot once the buffer is warm.
    pub updates_per_slot: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.5,
            tau: 0.001,
            lr_q: 0.001,
            lr_actor: 0.0001,
            lr_critic: 0.001,
            batch_size: 64,
            replay_capacity: 200_000,
            epsilon_start: 1.0,
            epsilon_end: 0.02,
            epsilon_anneal_frac: 0.8,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            hard_update_period: 100,
            episodes: 200,
            layout_period: 20,
            updates_per_slot: 1,
            hidden: DESK_HIDDEN.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config {
                    path: format!("train.{name}"),
                    message: format!("{v} is outside [0, 1]"),
                })
            }
        };
        unit("gamma", self.gamma)?;
        unit("tau", self.tau)?;
        unit("epsilon_start", self.epsilon_start)?;
        unit("epsilon_end", self.epsilon_end)?;
        unit("epsilon_anneal_frac", self.epsilon_anneal_frac)?;
        for (name, v) in [
            ("lr_q", self.lr_q),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config {
                    path: format!("train.{name}"),
                    message: format!("learning rate must be positive, got {v}"),
                });
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config {
                path: "train.noise_variance".into(),
                message: "must be a non-negative number".into(),
            });
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("layout_period", self.layout_period as usize),
        ] {
            if v == 0 {
                return Err(Error::Config {
                    path: format!("train.{name}"),
                    message: "must be positive".into(),
                });
            }
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::Config {
                path: "train.batch_size".into(),
                message: "exceeds replay_capacity".into(),
            });
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config {
                path: "train.hidden".into(),
                message: "hidden layer widths must be positive".into(),
            });
        }
        Ok(())
    }

    /// Linear decay over the first `epsilon_anneal_frac` of the episodes,
    /// constant afterwards.
    pub fn epsilon(&self, episode: u64) -> f64 {
        let horizon = self.epsilon_anneal_frac * self.episodes as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let t = (episode as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig {
            episodes: 100,
            ..Default::default()
        };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(40) - 0.51).abs() < 1e-12);
        assert!((cfg.epsilon(80) - 0.02).abs() < 1e-12);
        assert!((cfg.epsilon(99) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "train.gamma"));
        let cfg = TrainConfig {
            lr_q: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
