use serde::{Deserialize, Serialize};

use crate::approximator::AdamConfig;
use crate::envs::DEFAULT_HORIZON;
use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Entropy temperature.
    pub omega: f64,
    /// Polyak rate for target networks.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Critic and actor updates performed each time `steps_per_update`
    /// environment steps have been collected.
    pub updates_per_cycle: usize,
    pub steps_per_update: usize,
    pub episode_length: usize,
    pub total_episodes: usize,
    pub rollout_workers: usize,
    pub seed: u64,
    pub critic_lr: f64,
    pub actor_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            omega: 0.01,
            tau: 0.005,
            batch_size: 256,
            buffer_capacity: 100_000,
            updates_per_cycle: 4,
            steps_per_update: 100,
            episode_length: DEFAULT_HORIZON,
            total_episodes: 1000,
            rollout_workers: 2,
            seed: 0,
            critic_lr: 1e-3,
            actor_lr: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(config_err(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(config_err(format!("omega {} must be finite and >= 0", self.omega)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(config_err(format!("tau {} outside (0, 1]", self.tau)));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(config_err("need 0 < batch_size <= buffer_capacity"));
        }
        if self.episode_length == 0 || self.steps_per_update == 0 || self.rollout_workers == 0 {
            return Err(config_err(
                "episode_length, steps_per_update and rollout_workers must be positive",
            ));
        }
        if !(self.critic_lr > 0.0 && self.actor_lr > 0.0) {
            return Err(config_err("learning rates must be positive"));
        }
        Ok(())
    }

    pub fn critic_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.critic_lr,
            ..AdamConfig::default()
        }
    }

    pub fn actor_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.actor_lr,
            ..AdamConfig::default()
        }
    }
}
