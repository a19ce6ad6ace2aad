//! Imitative twin-critic actor-critic learning.

mod replay;
mod snapshot;
mod trainer;
mod update;

pub use replay::{Batch, ReplayBuffer, Transition};
pub use snapshot::{load_snapshot, save_snapshot, SNAPSHOT_VERSION};
pub use trainer::{
    actor_architecture, critic_architecture, mix_seed, EpisodeRecord, ExpertPool, LambdaMode,
    TrainConfig, TrainLog, Trainer,
};
pub use update::{
    actor_update, adaptive_lambda, bc_gradient, critic_update, lambda_weights, linear_lambda,
    policy_gradient, td_targets, ActorStats, ExpertBatch, LambdaSource, Networks, Optimizers,
    Smoothing,
};
