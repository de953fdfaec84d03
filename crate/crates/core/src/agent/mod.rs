//! Pixel SAC with β-mixed augmented batches and an encoder-invariance
//! penalty.

mod checkpoint;
mod config;
mod replay;
mod sac;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::AgentConfig;
pub use replay::{ReplayBuffer, Transition};
pub use sac::{
    actor_loss, alpha_loss, critic_loss, critic_target, deterministic_action, encoder_reg_loss, log_one_minus_tanh_sq,
    policy_backward, policy_sample, polyak_targets, reg_terms, squash_log_std, ActorGrads, CriticGrads, PolicySample,
    RegTarget, SacNets,
};
pub use trainer::{Agent, MetricsRecord, TrainSettings, Trainer, UpdateStats};
