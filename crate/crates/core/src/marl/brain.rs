use rand::Rng;
use rand_distr::StandardNormal;

use super::{Hyperparams, Mode};
use crate::error::{Error, Result};
use crate::neural::{chain_shapes, Activation, AdamConfig, Mlp, OptState};
use crate::sim_env::{action_dim, observation_dim};

/// Online and target networks of one learner plus their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBrain {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: OptState,
    pub critic_opt: OptState,
    /// Transitions trained on since the last federated round.
    pub samples_since_sync: u64,
}

impl AgentBrain {
    pub fn new(
        actor_in: usize,
        actor_out: usize,
        critic_in: usize,
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        let actor = Mlp::init(
            &chain_shapes(&[actor_in, hp.actor_hidden, hp.actor_hidden, actor_out]),
            Activation::Tanh,
            seed,
        )?;
        let critic = Mlp::init(
            &chain_shapes(&[critic_in, hp.critic_hidden, hp.critic_hidden, 1]),
            Activation::Identity,
            seed ^ 0x5eed_c817_1c00_0000,
        )?;
        Ok(Self::from_networks(actor, critic, hp))
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, hp: &Hyperparams) -> Self {
        Self {
            actor_opt: OptState::new(actor.param_count(), AdamConfig::with_learning_rate(hp.actor_lr)),
            critic_opt: OptState::new(
                critic.param_count(),
                AdamConfig::with_learning_rate(hp.critic_lr),
            ),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            samples_since_sync: 0,
        }
    }
}

/// Deterministic actor output plus clipped Gaussian exploration noise. Reads
/// nothing but the agent's own observation.
pub fn select_action<R: Rng + ?Sized>(
    brain: &AgentBrain,
    obs: &[f64],
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut action = brain.actor.forward(obs)?;
    if noise_sigma > 0.0 {
        for a in action.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *a += noise_sigma * z;
        }
    }
    for a in action.iter_mut() {
        *a = a.clamp(-1.0, 1.0);
    }
    Ok(action)
}

/// `target <- tau * online + (1 - tau) * target`, componentwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.shapes() != online.shapes() {
        return Err(Error::DimensionMismatch {
            context: "soft update",
            expected: target.param_count(),
            actual: online.param_count(),
        });
    }
    for (t, &o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

/// The learners of one experiment and how their inputs are wired.
#[derive(Debug, Clone, PartialEq)]
pub struct Team {
    mode: Mode,
    n_agents: usize,
    obs_dim: usize,
    act_dim: usize,
    pub(crate) brains: Vec<AgentBrain>,
    pub(crate) env_steps: u64,
}

impl Team {
    /// All brains start from the same parameters.
    pub fn new(
        mode: Mode,
        n_agents: usize,
        obs_dim: usize,
        act_dim: usize,
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::config("n_agents", "must be >= 1"));
        }
        let (n_brains, actor_in, actor_out) = match mode {
            Mode::Centralized => (1, n_agents * obs_dim, n_agents * act_dim),
            _ => (n_agents, obs_dim, act_dim),
        };
        let critic_in = if mode.joint_critic() {
            n_agents * (obs_dim + act_dim)
        } else {
            obs_dim + act_dim
        };
        let template = AgentBrain::new(actor_in, actor_out, critic_in, hp, seed)?;
        Ok(Self {
            mode,
            n_agents,
            obs_dim,
            act_dim,
            brains: vec![template; n_brains],
            env_steps: 0,
        })
    }

    /// Team sized for the mesh simulator's observation and action layout.
    pub fn for_env(mode: Mode, n_agents: usize, hp: &Hyperparams, seed: u64) -> Result<Self> {
        Self::new(mode, n_agents, observation_dim(), action_dim(), hp, seed)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn brains(&self) -> &[AgentBrain] {
        &self.brains
    }

    pub fn brains_mut(&mut self) -> &mut [AgentBrain] {
        &mut self.brains
    }

    pub fn n_brains(&self) -> usize {
        self.brains.len()
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Columns of the critic input holding the action of brain `b`.
    pub(crate) fn action_columns(&self, b: usize) -> (usize, usize) {
        match self.mode {
            Mode::Maddpg => (self.n_agents * self.obs_dim + b * self.act_dim, self.act_dim),
            Mode::Centralized => (self.n_agents * self.obs_dim, self.n_agents * self.act_dim),
            Mode::Independent | Mode::FedNoMarl => (self.obs_dim, self.act_dim),
        }
    }

    /// Joint action for the current step, one vector per environment agent.
    /// Decentralized modes evaluate each actor on its own observation only.
    pub fn act<R: Rng + ?Sized>(
        &self,
        joint_obs: &[Vec<f64>],
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        if joint_obs.len() != self.n_agents {
            return Err(Error::DimensionMismatch {
                context: "joint observation",
                expected: self.n_agents,
                actual: joint_obs.len(),
            });
        }
        match self.mode {
            Mode::Centralized => {
                let state: Vec<f64> = joint_obs.concat();
                let joint = select_action(&self.brains[0], &state, noise_sigma, rng)?;
                Ok(joint.chunks(self.act_dim).map(<[f64]>::to_vec).collect())
            }
            _ => self
                .brains
                .iter()
                .zip(joint_obs)
                .map(|(brain, obs)| select_action(brain, obs, noise_sigma, rng))
                .collect(),
        }
    }
}
