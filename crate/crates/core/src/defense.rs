//! Adversarial layer: poisoning attackers, anomaly scoring of federated
//! updates, observation perturbation for adversarial training, and the jam
//! schedule used when jamming is enabled.
//!
//! The anomaly score of an update `theta_i` against all updates of the round
//! is `max(|ln(|theta_i| / median_j |theta_j|)|, 1 - cos(theta_i, m))` where
//! `m` is the coordinate-wise median. Updates scoring above the threshold are
//! excluded from aggregation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::federation::ModelUpdate;
use crate::sim_env::{EnvConfig, JamEvent, Observation};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoisonMode {
    /// `theta' = -scale * theta`.
    SignFlipScaled,
    /// Gaussian noise with expected norm `scale * |theta|`.
    RandomNoise,
}

impl fmt::Display for PoisonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoisonMode::SignFlipScaled => "sign_flip_scaled",
            PoisonMode::RandomNoise => "random_noise",
        })
    }
}

impl FromStr for PoisonMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sign_flip_scaled" => Ok(PoisonMode::SignFlipScaled),
            "random_noise" => Ok(PoisonMode::RandomNoise),
            other => Err(format!("unknown poison mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub poison_fraction: f64,
    pub poison_mode: PoisonMode,
    pub poison_scale: f64,
    pub jam_enabled: bool,
    /// Steps between the starts of consecutive jam events.
    pub jam_period: usize,
    pub jam_duration: usize,
    pub jam_radius_km: f64,
    pub jam_loss_boost: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            poison_fraction: 0.0,
            poison_mode: PoisonMode::SignFlipScaled,
            poison_scale: 10.0,
            jam_enabled: false,
            jam_period: 20,
            jam_duration: 10,
            jam_radius_km: 1.5,
            jam_loss_boost: 0.5,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return Err(Error::config("attack.poison_fraction", "must lie in [0, 1]"));
        }
        if !(self.poison_scale > 0.0 && self.poison_scale.is_finite()) {
            return Err(Error::config("attack.poison_scale", "must be > 0"));
        }
        if self.jam_period < 1 || self.jam_duration < 1 {
            return Err(Error::config("attack.jam_period", "period and duration must be >= 1"));
        }
        if !(self.jam_radius_km > 0.0) {
            return Err(Error::config("attack.jam_radius_km", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.jam_loss_boost) {
            return Err(Error::config("attack.jam_loss_boost", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn poisoning_active(&self) -> bool {
        self.poison_fraction > 0.0
    }

    /// Number of compromised agents out of `n_agents`, rounded to nearest.
    pub fn attacker_count(&self, n_agents: usize) -> usize {
        ((self.poison_fraction * n_agents as f64).round() as usize).min(n_agents)
    }
}

/// Distinct attacker indices drawn uniformly, sorted ascending.
pub fn select_attackers<R: Rng + ?Sized>(n_agents: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut ids: Vec<usize> = rand::seq::index::sample(rng, n_agents, count.min(n_agents)).into_vec();
    ids.sort_unstable();
    ids
}

/// Intermittent jamming: an event every `jam_period` steps lasting
/// `jam_duration` steps, each centred at a uniformly drawn point.
pub fn jam_schedule<R: Rng + ?Sized>(attack: &AttackConfig, env: &EnvConfig, rng: &mut R) -> Vec<JamEvent> {
    if !attack.jam_enabled {
        return Vec::new();
    }
    let mut events = Vec::new();
    let mut start = attack.jam_period / 2;
    while start < env.episode_len {
        events.push(JamEvent {
            start_step: start,
            end_step: start + attack.jam_duration - 1,
            center: [
                rng.random::<f64>() * env.area_km,
                rng.random::<f64>() * env.area_km,
            ],
            radius_km: attack.jam_radius_km,
            loss_boost: attack.jam_loss_boost,
        });
        start += attack.jam_period;
    }
    events
}

/// Replaces the parameters of `update` according to `mode`; metadata is kept.
pub fn poison_update<R: Rng + ?Sized>(
    update: &ModelUpdate,
    mode: PoisonMode,
    scale: f64,
    rng: &mut R,
) -> ModelUpdate {
    let values = update.params.values();
    let poisoned: Vec<f64> = match mode {
        PoisonMode::SignFlipScaled => values.iter().map(|v| -scale * v).collect(),
        PoisonMode::RandomNoise => {
            let norm = l2(values);
            let sd = scale * norm / (values.len() as f64).sqrt();
            values
                .iter()
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    sd * z
                })
                .collect()
        }
    };
    ModelUpdate {
        params: update
            .params
            .with_values(poisoned)
            .expect("same length as the original"),
        ..update.clone()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 0 {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

fn coordinate_median(peers: &[&[f64]]) -> Vec<f64> {
    let dim = peers[0].len();
    let mut column = vec![0.0; peers.len()];
    (0..dim)
        .map(|k| {
            for (c, p) in column.iter_mut().zip(peers) {
                *c = p[k];
            }
            median(&mut column)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    Ok,
    NormOutlier,
    DirectionOutlier,
}

impl fmt::Display for VerdictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictReason::Ok => "OK",
            VerdictReason::NormOutlier => "NORM_OUTLIER",
            VerdictReason::DirectionOutlier => "DIRECTION_OUTLIER",
        })
    }
}

/// Both components of an anomaly score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParts {
    pub norm_dev: f64,
    pub direction_dev: f64,
}

impl ScoreParts {
    pub fn score(&self) -> f64 {
        self.norm_dev.max(self.direction_dev)
    }

    fn reason(&self) -> VerdictReason {
        if self.norm_dev >= self.direction_dev {
            VerdictReason::NormOutlier
        } else {
            VerdictReason::DirectionOutlier
        }
    }
}

/// Robust reference point of one round: median norm and coordinate-wise median.
struct Reference {
    median_norm: f64,
    center: Vec<f64>,
    center_norm: f64,
}

impl Reference {
    fn of(peers: &[&[f64]]) -> Self {
        let mut norms: Vec<f64> = peers.iter().map(|p| l2(p)).collect();
        let center = coordinate_median(peers);
        Self {
            median_norm: median(&mut norms),
            center_norm: l2(&center),
            center,
        }
    }

    fn score(&self, update: &[f64]) -> ScoreParts {
        let norm = l2(update);
        if norm == 0.0 {
            return ScoreParts {
                norm_dev: f64::INFINITY,
                direction_dev: f64::INFINITY,
            };
        }
        let norm_dev = if self.median_norm > 0.0 {
            (norm / self.median_norm).ln().abs()
        } else {
            f64::INFINITY
        };
        let cosine = if self.center_norm > 0.0 {
            update.iter().zip(&self.center).map(|(a, b)| a * b).sum::<f64>()
                / (norm * self.center_norm)
        } else {
            0.0
        };
        ScoreParts {
            norm_dev,
            direction_dev: 1.0 - cosine.clamp(-1.0, 1.0),
        }
    }
}

/// Scores every entry of `peers` against the whole set. With fewer than
/// three peers every score is zero.
pub fn score_all(peers: &[&[f64]]) -> Vec<ScoreParts> {
    if peers.len() < 3 {
        let zero = ScoreParts {
            norm_dev: 0.0,
            direction_dev: 0.0,
        };
        return vec![zero; peers.len()];
    }
    let reference = Reference::of(peers);
    peers.iter().map(|p| reference.score(p)).collect()
}

/// Anomaly score of `update` against `peers`, all updates of the round
/// (normally including `update` itself). A zero-norm update scores `+inf`.
pub fn score_update(update: &[f64], peers: &[&[f64]]) -> f64 {
    if peers.len() < 3 {
        return 0.0;
    }
    Reference::of(peers).score(update).score()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyVerdict {
    pub agent_id: usize,
    pub score: f64,
    pub accepted: bool,
    pub reason: VerdictReason,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub accepted: Vec<ModelUpdate>,
    pub verdicts: Vec<AnomalyVerdict>,
    /// Nothing passed the threshold; the lowest-scoring update was kept.
    pub fallback: bool,
}

/// Keeps updates scoring at most `threshold`. If none pass, the single
/// lowest-scoring update is kept (ties to the earliest) and the outcome is
/// flagged.
pub fn filter_updates(updates: Vec<ModelUpdate>, threshold: f64) -> FilterOutcome {
    let parts = {
        let views: Vec<&[f64]> = updates.iter().map(|u| u.params.values()).collect();
        score_all(&views)
    };
    let mut verdicts: Vec<AnomalyVerdict> = updates
        .iter()
        .zip(&parts)
        .map(|(u, p)| {
            let score = p.score();
            let accepted = score <= threshold;
            AnomalyVerdict {
                agent_id: u.agent_id,
                score,
                accepted,
                reason: if accepted { VerdictReason::Ok } else { p.reason() },
            }
        })
        .collect();
    let mut fallback = false;
    if !updates.is_empty() && verdicts.iter().all(|v| !v.accepted) {
        let best = verdicts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.score.total_cmp(&b.1.score))
            .map(|(i, _)| i)
            .expect("non-empty");
        verdicts[best].accepted = true;
        fallback = true;
    }
    let accepted = updates
        .into_iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.accepted)
        .map(|(u, _)| u)
        .collect();
    FilterOutcome {
        accepted,
        verdicts,
        fallback,
    }
}

/// Adds `U(-epsilon, epsilon)` noise to every entry and clamps into `[0, 1]`.
pub fn perturb_observation<R: Rng + ?Sized>(obs: &Observation, epsilon: f64, rng: &mut R) -> Observation {
    if epsilon <= 0.0 {
        return obs.clone();
    }
    let values = obs
        .as_slice()
        .iter()
        .map(|&v| (v + rng.random_range(-epsilon..=epsilon)).clamp(0.0, 1.0))
        .collect();
    Observation::new(values).expect("same dimension")
}

#[cfg(test)]
#[path = "defense_tests.rs"]
mod tests;
