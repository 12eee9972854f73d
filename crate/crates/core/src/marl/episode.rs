use rand::Rng;

use super::brain::Team;
use super::buffer::{ReplayBuffer, Transition};
use super::update::{update_pass, Batch};
use super::Hyperparams;
use crate::defense::perturb_observation;
use crate::error::Result;
use crate::rng::seeded;
use crate::sim_env::{compute_reward, ActionVector, Observation, RewardWeights, StepOutcome, WorldState};

/// Random bounded observation noise used for adversarial training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub probability: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub noise_sigma: f64,
    pub weights: RewardWeights,
    pub perturbation: Option<Perturbation>,
}

/// Totals over one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub steps: usize,
    pub total_reward: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub latency_sum_ms: f64,
    pub delivered_by_source: Vec<u64>,
    pub detections: u64,
    pub step_seconds: f64,
    pub sources: Vec<bool>,
    pub update_passes: usize,
    pub critic_loss_sum: f64,
}

impl EpisodeStats {
    fn new(world: &WorldState) -> Self {
        let n = world.n_agents();
        Self {
            steps: 0,
            total_reward: 0.0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            latency_sum_ms: 0.0,
            delivered_by_source: vec![0; n],
            detections: 0,
            step_seconds: world.config().step_seconds,
            sources: world.nodes().iter().map(|node| !node.is_gateway).collect(),
            update_passes: 0,
            critic_loss_sum: 0.0,
        }
    }

    fn record(&mut self, outcome: &StepOutcome, reward: f64) {
        self.steps += 1;
        self.total_reward += reward;
        self.generated += outcome.generated;
        self.delivered += outcome.delivered;
        self.dropped += outcome.dropped;
        self.latency_sum_ms += outcome.delivered_latency_sum_ms;
        for (acc, d) in self.delivered_by_source.iter_mut().zip(&outcome.delivered_by_source) {
            *acc += d;
        }
        self.detections += outcome.adversarial_detected.iter().filter(|&&d| d).count() as u64;
    }

    /// Mean shared reward per step.
    pub fn mean_reward(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_reward / self.steps as f64
        }
    }

    pub fn mean_latency_ms(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.latency_sum_ms / self.delivered as f64
        }
    }

    pub fn throughput_per_s(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.delivered as f64 / (self.steps as f64 * self.step_seconds)
        }
    }

    pub fn loss_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            (self.dropped as f64 / self.generated as f64).clamp(0.0, 1.0)
        }
    }

    /// Population variance of delivered counts over traffic-generating nodes.
    pub fn delivered_variance(&self) -> f64 {
        let counts: Vec<f64> = self
            .delivered_by_source
            .iter()
            .zip(&self.sources)
            .filter(|(_, &src)| src)
            .map(|(&c, _)| c as f64)
            .collect();
        if counts.is_empty() {
            return 0.0;
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / counts.len() as f64
    }
}

fn observe<R: Rng + ?Sized>(
    world: &WorldState,
    perturbation: Option<Perturbation>,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    world
        .observe_all()
        .into_iter()
        .map(|obs| match perturbation {
            Some(p) if rng.random::<f64>() < p.probability => {
                perturb_observation(&obs, p.epsilon, rng).into_vec()
            }
            _ => obs.into_vec(),
        })
        .collect()
}

fn to_actions(joint: &[Vec<f64>]) -> Result<Vec<ActionVector>> {
    joint.iter().map(|a| ActionVector::new(a.clone())).collect()
}

/// Plays `world` to the end, storing every joint step in `buffer` and running
/// an update pass every `hp.update_every` environment steps once the buffer
/// holds a full batch.
pub fn train_episode<R: Rng + ?Sized>(
    team: &mut Team,
    world: &mut WorldState,
    hp: &Hyperparams,
    buffer: &mut ReplayBuffer,
    rng: &mut R,
    options: &EpisodeOptions,
) -> Result<EpisodeStats> {
    let mut stats = EpisodeStats::new(world);
    let mut obs = observe(world, options.perturbation, rng);
    while !world.is_done() {
        let joint_action = team.act(&obs, options.noise_sigma, rng)?;
        let outcome = world.step(&to_actions(&joint_action)?)?;
        let reward = compute_reward(&outcome, &options.weights);
        stats.record(&outcome, reward);
        let next_obs = observe(world, options.perturbation, rng);
        buffer.push(Transition {
            joint_obs: obs,
            joint_action,
            reward,
            joint_next_obs: next_obs.clone(),
            done: world.is_done(),
        });
        team.env_steps += 1;
        if buffer.len() >= hp.batch_size && team.env_steps % hp.update_every as u64 == 0 {
            let batch = Batch::from_transitions(&buffer.sample(hp.batch_size, rng))?;
            let report = update_pass(team, &batch, hp)?;
            stats.update_passes += 1;
            stats.critic_loss_sum += report.mean_critic_loss;
        }
        obs = next_obs;
    }
    Ok(stats)
}

/// Noise-free rollout; the team is only read.
pub fn evaluate_episode(team: &Team, world: &mut WorldState, weights: &RewardWeights) -> Result<EpisodeStats> {
    let mut stats = EpisodeStats::new(world);
    // Never drawn from at zero noise.
    let mut idle = seeded(0);
    while !world.is_done() {
        let obs: Vec<Vec<f64>> = world.observe_all().into_iter().map(Observation::into_vec).collect();
        let joint_action = team.act(&obs, 0.0, &mut idle)?;
        let outcome = world.step(&to_actions(&joint_action)?)?;
        stats.record(&outcome, compute_reward(&outcome, weights));
    }
    Ok(stats)
}
