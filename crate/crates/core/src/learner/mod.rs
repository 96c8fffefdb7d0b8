//! Replay, the soft actor-critic update and the rollout/training loop.

mod config;
mod replay;
mod train;
mod update;

pub use config::TrainConfig;
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    derive_seed, run_episode, train_loop, Algorithm, EpisodeMetrics, EpisodeRecord, Learner,
    TrainReport, UpdateStats, TARGET_PREFIX,
};
pub use update::{
    batch_policies, compute_targets, counterfactual_advantage, critic_loss, policy_gradient,
    PolicyStats,
};
