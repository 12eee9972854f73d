use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use super::brain::{soft_update, Team};
use super::buffer::Transition;
use super::{Hyperparams, Mode};
use crate::error::{Error, Result};
use crate::neural::Gradients;

/// Sampled transitions laid out as one matrix per environment agent.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Vec<Array2<f64>>,
    pub actions: Vec<Array2<f64>>,
    pub next_obs: Vec<Array2<f64>>,
    pub rewards: Array1<f64>,
    pub done: Array1<f64>,
}

fn stack_rows(rows: impl Iterator<Item = Vec<f64>>, n: usize, width: usize) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.flatten().collect();
    if flat.len() != n * width {
        return Err(Error::DimensionMismatch {
            context: "batch rows",
            expected: n * width,
            actual: flat.len(),
        });
    }
    Ok(Array2::from_shape_vec((n, width), flat).expect("checked length"))
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let first = ts.first().ok_or_else(|| Error::config("batch", "must be non-empty"))?;
        let n = ts.len();
        let n_agents = first.joint_obs.len();
        let obs_dim = first.joint_obs[0].len();
        let act_dim = first.joint_action[0].len();
        for t in ts {
            if t.joint_obs.len() != n_agents
                || t.joint_action.len() != n_agents
                || t.joint_next_obs.len() != n_agents
            {
                return Err(Error::DimensionMismatch {
                    context: "transition agents",
                    expected: n_agents,
                    actual: t.joint_obs.len(),
                });
            }
            if !t.reward.is_finite() {
                return Err(Error::NonFinite("transition reward".into()));
            }
        }
        let per_agent = |pick: fn(&Transition) -> &Vec<Vec<f64>>, width: usize| {
            (0..n_agents)
                .map(|i| stack_rows(ts.iter().map(|t| pick(t)[i].clone()), n, width))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            obs: per_agent(|t| &t.joint_obs, obs_dim)?,
            actions: per_agent(|t| &t.joint_action, act_dim)?,
            next_obs: per_agent(|t| &t.joint_next_obs, obs_dim)?,
            rewards: ts.iter().map(|t| t.reward).collect(),
            done: ts.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

fn hstack(parts: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    concatenate(Axis(1), parts).expect("row counts agree")
}

impl Team {
    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::config("batch", "must be non-empty"));
        }
        for (mats, dim, ctx) in [
            (&batch.obs, self.obs_dim(), "batch observations"),
            (&batch.next_obs, self.obs_dim(), "batch next observations"),
            (&batch.actions, self.act_dim(), "batch actions"),
        ] {
            if mats.len() != self.n_agents() {
                return Err(Error::DimensionMismatch {
                    context: ctx,
                    expected: self.n_agents(),
                    actual: mats.len(),
                });
            }
            if let Some(m) = mats.iter().find(|m| m.ncols() != dim) {
                return Err(Error::DimensionMismatch {
                    context: ctx,
                    expected: dim,
                    actual: m.ncols(),
                });
            }
        }
        Ok(())
    }

    /// Actor input of brain `b` for a batch of per-agent observations.
    fn actor_input(&self, b: usize, obs: &[Array2<f64>]) -> Array2<f64> {
        match self.mode() {
            Mode::Centralized => hstack(&obs.iter().map(|m| m.view()).collect::<Vec<_>>()),
            _ => obs[b].clone(),
        }
    }

    fn critic_input(&self, b: usize, obs: &[Array2<f64>], actions: &[Array2<f64>]) -> Array2<f64> {
        if self.mode().joint_critic() {
            let views: Vec<_> = obs.iter().chain(actions).map(|m| m.view()).collect();
            hstack(&views)
        } else {
            hstack(&[obs[b].view(), actions[b].view()])
        }
    }

    /// Target-policy actions at the next observations, per environment agent.
    fn target_actions(&self, next_obs: &[Array2<f64>]) -> Result<Vec<Array2<f64>>> {
        match self.mode() {
            Mode::Centralized => {
                let joint = self.brains[0]
                    .target_actor
                    .predict_batch(self.actor_input(0, next_obs))?;
                Ok((0..self.n_agents())
                    .map(|i| {
                        joint
                            .slice(s![.., i * self.act_dim()..(i + 1) * self.act_dim()])
                            .to_owned()
                    })
                    .collect())
            }
            _ => self
                .brains
                .iter()
                .zip(next_obs)
                .map(|(brain, o)| brain.target_actor.predict_batch(o.clone()))
                .collect(),
        }
    }

    fn targets_with(&self, b: usize, batch: &Batch, next_actions: &[Array2<f64>], hp: &Hyperparams) -> Result<Array1<f64>> {
        let next_q = self.brains[b]
            .target_critic
            .predict_batch(self.critic_input(b, &batch.next_obs, next_actions))?;
        let bootstrap = next_q.column(0).to_owned() * (1.0 - &batch.done) * hp.discount;
        Ok(&batch.rewards * hp.reward_scale + bootstrap)
    }
}

/// TD targets `y = scale * r + discount * (1 - done) * Q'_b(s', a')` for brain `b`,
/// with `a'` drawn from every agent's target actor.
pub fn critic_targets(team: &Team, b: usize, batch: &Batch, hp: &Hyperparams) -> Result<Array1<f64>> {
    team.check_batch(batch)?;
    check_brain(team, b)?;
    let next_actions = team.target_actions(&batch.next_obs)?;
    team.targets_with(b, batch, &next_actions, hp)
}

fn check_brain(team: &Team, b: usize) -> Result<()> {
    if b >= team.n_brains() {
        return Err(Error::AgentOutOfRange {
            agent: b,
            n_agents: team.n_brains(),
        });
    }
    Ok(())
}

/// Mean squared TD error of brain `b`'s critic and its parameter gradient.
pub fn critic_loss_gradient(
    team: &Team,
    b: usize,
    batch: &Batch,
    targets: &Array1<f64>,
) -> Result<(f64, Gradients)> {
    team.check_batch(batch)?;
    check_brain(team, b)?;
    if targets.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            context: "td targets",
            expected: batch.len(),
            actual: targets.len(),
        });
    }
    let critic = &team.brains[b].critic;
    let cache = critic.forward_batch(team.critic_input(b, &batch.obs, &batch.actions))?;
    let diff = cache.output().column(0).to_owned() - targets;
    let n = batch.len() as f64;
    let loss = diff.mapv(|d| d * d).sum() / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("critic {b} loss")));
    }
    let upstream = (diff * (2.0 / n)).insert_axis(Axis(1));
    let (grads, _) = critic.backward_batch(&cache, &upstream)?;
    Ok((loss, grads))
}

/// One optimizer step on the critic of brain `b`; returns the loss before the step.
pub fn update_critic(team: &mut Team, b: usize, batch: &Batch, targets: &Array1<f64>) -> Result<f64> {
    let (loss, grads) = critic_loss_gradient(team, b, batch, targets)?;
    let brain = &mut team.brains[b];
    brain.critic.apply_update(&grads, &mut brain.critic_opt)?;
    Ok(loss)
}

/// Mean `Q_b` with brain `b`'s own action replaced by its current policy, and
/// the gradient of `-mean Q_b` with respect to the actor parameters. Other
/// agents' actions come from the batch; the critic is left untouched.
pub fn actor_objective_gradient(team: &Team, b: usize, batch: &Batch) -> Result<(f64, Gradients)> {
    actor_gradient(team, b, batch, 0.0)
}

/// Adds `preact_reg * mean(z^2)` over the actor's output pre-activations `z`
/// to the minimized loss. The returned objective is still the bare mean `Q_b`.
fn actor_gradient(team: &Team, b: usize, batch: &Batch, preact_reg: f64) -> Result<(f64, Gradients)> {
    team.check_batch(batch)?;
    check_brain(team, b)?;
    let brain = &team.brains[b];
    let actor_cache = brain.actor.forward_batch(team.actor_input(b, &batch.obs))?;
    let (col, width) = team.action_columns(b);
    let mut input = team.critic_input(b, &batch.obs, &batch.actions);
    input
        .slice_mut(s![.., col..col + width])
        .assign(actor_cache.output());
    let critic_cache = brain.critic.forward_batch(input)?;
    let n = batch.len() as f64;
    let objective = critic_cache.output().sum() / n;
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("actor {b} objective")));
    }
    let upstream = Array2::from_elem((batch.len(), 1), -1.0 / n);
    let input_grad = brain.critic.input_gradient_batch(&critic_cache, &upstream)?;
    let action_grad = input_grad.slice(s![.., col..col + width]).to_owned();
    let (grads, _) = if preact_reg > 0.0 {
        let pre = actor_cache.output_preactivation();
        let pre_grad = pre * (2.0 * preact_reg / pre.len() as f64);
        brain.actor.backward_batch_preactivation(&actor_cache, &action_grad, &pre_grad)?
    } else {
        brain.actor.backward_batch(&actor_cache, &action_grad)?
    };
    Ok((objective, grads))
}

/// One ascent step on the mean critic value, with the pre-activation penalty
/// from `hp`; returns the objective before the step.
pub fn update_actor(team: &mut Team, b: usize, batch: &Batch, hp: &Hyperparams) -> Result<f64> {
    let (objective, grads) = actor_gradient(team, b, batch, hp.actor_preact_reg)?;
    let brain = &mut team.brains[b];
    brain.actor.apply_update(&grads, &mut brain.actor_opt)?;
    Ok(objective)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateReport {
    pub mean_critic_loss: f64,
    pub mean_actor_objective: f64,
}

/// Critics of every brain, then every actor, then all target networks.
pub fn update_pass(team: &mut Team, batch: &Batch, hp: &Hyperparams) -> Result<UpdateReport> {
    team.check_batch(batch)?;
    let next_actions = team.target_actions(&batch.next_obs)?;
    let targets = (0..team.n_brains())
        .map(|b| team.targets_with(b, batch, &next_actions, hp))
        .collect::<Result<Vec<_>>>()?;
    let n_brains = team.n_brains();
    let mut loss_sum = 0.0;
    for (b, y) in targets.iter().enumerate() {
        loss_sum += update_critic(team, b, batch, y)?;
    }
    let mut objective_sum = 0.0;
    for b in 0..n_brains {
        objective_sum += update_actor(team, b, batch, hp)?;
    }
    for brain in team.brains.iter_mut() {
        soft_update(&mut brain.target_critic, &brain.critic, hp.soft_tau)?;
        soft_update(&mut brain.target_actor, &brain.actor, hp.soft_tau)?;
        brain.samples_since_sync += batch.len() as u64;
    }
    Ok(UpdateReport {
        mean_critic_loss: loss_sum / n_brains as f64,
        mean_actor_objective: objective_sum / n_brains as f64,
    })
}
