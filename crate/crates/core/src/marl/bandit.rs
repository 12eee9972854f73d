//! Stateless one-dimensional bandit used as a learning sanity check: the
//! reward is `-(a - target)^2` and the optimal deterministic policy is the
//! constant `target`.

use super::brain::Team;
use super::buffer::{ReplayBuffer, Transition};
use super::update::{update_pass, Batch};
use super::{Hyperparams, Mode};
use crate::error::Result;
use crate::rng::{derived, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct BanditReport {
    /// First update count after which `|pi(o) - target| < tolerance`.
    pub updates_to_converge: Option<usize>,
    pub final_action: f64,
    pub target: f64,
}

pub fn bandit_sanity(
    seed: u64,
    target: f64,
    max_updates: usize,
    tolerance: f64,
    hp: &Hyperparams,
) -> Result<BanditReport> {
    let hp = Hyperparams {
        mode: Mode::Independent,
        ..hp.clone()
    };
    hp.validate()?;
    let mut team = Team::new(Mode::Independent, 1, 1, 1, &hp, seed)?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut rng = derived(seed, stream::EXPLORATION, 0);
    let obs = vec![vec![1.0]];
    let policy = |team: &Team| team.brains()[0].actor.forward(&obs[0]).map(|a| a[0]);

    let mut updates = 0;
    let mut reached = None;
    while updates < max_updates {
        let action = team.act(&obs, hp.noise_sigma, &mut rng)?;
        let reward = -(action[0][0] - target).powi(2);
        buffer.push(Transition {
            joint_obs: obs.clone(),
            joint_action: action,
            reward,
            joint_next_obs: obs.clone(),
            done: true,
        });
        if buffer.len() < hp.batch_size {
            continue;
        }
        let batch = Batch::from_transitions(&buffer.sample(hp.batch_size, &mut rng))?;
        update_pass(&mut team, &batch, &hp)?;
        updates += 1;
        if reached.is_none() && (policy(&team)? - target).abs() < tolerance {
            reached = Some(updates);
        }
    }
    Ok(BanditReport {
        updates_to_converge: reached,
        final_action: policy(&team)?,
        target,
    })
}
