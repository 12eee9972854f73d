//! Actor-critic agents trained with MADDPG.
//!
//! Every agent owns a deterministic actor over its local observation and a
//! critic. In [`Mode::Maddpg`] the critic scores the joint observation and the
//! joint action of all agents; in the independent modes it sees only the
//! agent's own pair; in [`Mode::Centralized`] a single brain observes and acts
//! for the whole network. Training data lives in one shared buffer of joint
//! transitions and all agents receive the same global reward.

mod bandit;
mod brain;
mod buffer;
mod episode;
mod update;

pub use bandit::{bandit_sanity, BanditReport};
pub use brain::{select_action, soft_update, AgentBrain, Team};
pub use buffer::{ReplayBuffer, Transition};
pub use episode::{evaluate_episode, train_episode, EpisodeOptions, EpisodeStats, Perturbation};
pub use update::{
    actor_objective_gradient, critic_loss_gradient, critic_targets, update_actor, update_critic,
    update_pass, Batch, UpdateReport,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Decentralized actors, critics over joint observations and actions.
    Maddpg,
    /// Each agent runs DDPG on its own observation/action pair.
    Independent,
    /// One brain over the concatenated state and joint action.
    Centralized,
    /// Independent critics; federation is enabled by the harness.
    FedNoMarl,
}

impl Mode {
    pub fn joint_critic(self) -> bool {
        matches!(self, Mode::Maddpg | Mode::Centralized)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub discount: f64,
    pub soft_tau: f64,
    pub batch_size: usize,
    /// Exploration noise at the start of training.
    pub noise_sigma: f64,
    /// Noise reached by linear decay at the last training episode.
    pub noise_sigma_final: f64,
    pub mode: Mode,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    pub buffer_capacity: usize,
    /// Environment steps between update passes.
    pub update_every: usize,
    /// Multiplier applied to rewards inside TD targets.
    pub reward_scale: f64,
    /// Weight of the squared actor output pre-activations in the actor loss;
    /// keeps tanh outputs away from saturation.
    pub actor_preact_reg: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            discount: 0.95,
            soft_tau: 0.01,
            batch_size: 128,
            noise_sigma: 0.3,
            noise_sigma_final: 0.05,
            mode: Mode::Maddpg,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            actor_hidden: 64,
            critic_hidden: 128,
            buffer_capacity: 100_000,
            update_every: 1,
            reward_scale: 1.0,
            actor_preact_reg: 1e-3,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("hyper.discount", "must lie in [0, 1)"));
        }
        if !(self.soft_tau > 0.0 && self.soft_tau <= 1.0) {
            return Err(Error::config("hyper.soft_tau", "must lie in (0, 1]"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("hyper.batch_size", "must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma_final >= 0.0) {
            return Err(Error::config("hyper.noise_sigma", "must be >= 0"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::config("hyper.actor_lr", "learning rates must be > 0"));
        }
        if self.actor_hidden < 1 || self.critic_hidden < 1 {
            return Err(Error::config("hyper.actor_hidden", "hidden widths must be >= 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config("hyper.buffer_capacity", "must be >= batch_size"));
        }
        if self.update_every < 1 {
            return Err(Error::config("hyper.update_every", "must be >= 1"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("hyper.reward_scale", "must be > 0"));
        }
        if !(self.actor_preact_reg >= 0.0 && self.actor_preact_reg.is_finite()) {
            return Err(Error::config("hyper.actor_preact_reg", "must be >= 0"));
        }
        Ok(())
    }

    /// Linear decay from `noise_sigma` to `noise_sigma_final` over `total` episodes.
    pub fn sigma_at(&self, episode: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.noise_sigma;
        }
        let frac = (episode as f64 / (total - 1) as f64).clamp(0.0, 1.0);
        self.noise_sigma + (self.noise_sigma_final - self.noise_sigma) * frac
    }
}
