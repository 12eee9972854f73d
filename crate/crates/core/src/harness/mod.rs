//! Experiment orchestration: the per-seed training loop for every variant,
//! post-training evaluation, CSV output and multi-variant comparison.

mod compare;
mod config;
mod convergence;
mod output;

pub use compare::{compare_variants, ComparisonReport, ComparisonRow};
pub use config::{parse_config, DefenseConfig, ExperimentConfig, FederationConfig, RunConfig, Variant};
pub use convergence::detect_convergence;
pub use output::{format_number, metrics_header, SUMMARY_HEADER};

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::defense::select_attackers;
use crate::error::{Error, Result};
use crate::federation::{federated_round, initial_global, RoundReport, RoundSettings};
use crate::marl::{evaluate_episode, train_episode, EpisodeOptions, EpisodeStats, ReplayBuffer, Team};
use crate::rng::{derive_seed, derived, stream};
use crate::sim_env::{EnvConfig, WorldState};

/// One training episode of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub seed: u64,
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_latency_ms: f64,
    pub throughput_per_s: f64,
    pub loss_rate: f64,
    pub per_agent_delivered_variance: f64,
    /// Updates rejected by the filter in the round closing this episode.
    pub round_rejections: u64,
}

impl MetricsRecord {
    fn from_stats(seed: u64, episode: usize, stats: &EpisodeStats, round_rejections: u64) -> Self {
        Self {
            seed,
            episode,
            mean_reward: stats.mean_reward(),
            mean_latency_ms: stats.mean_latency_ms(),
            throughput_per_s: stats.throughput_per_s(),
            loss_rate: stats.loss_rate(),
            per_agent_delivered_variance: stats.delivered_variance(),
            round_rejections,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub convergence_episode: Option<usize>,
    /// Mean per-step reward over the noise-free evaluation episodes.
    pub final_window_reward: f64,
    pub final_latency_ms: f64,
    pub final_throughput: f64,
    /// Training hit a non-finite value and stopped early.
    pub diverged: bool,
}

/// Instrumentation for variant wiring checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub federated_rounds: usize,
    pub filter_calls: usize,
    pub brains_constructed: usize,
    pub update_passes: usize,
}

/// Everything one seed produced, kept in memory.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub rounds: Vec<RoundReport>,
    pub counters: RunCounters,
    pub team: Team,
    /// Agents submitting poisoned updates; empty without poisoning.
    pub attackers: Vec<usize>,
}

/// Node positions shared by every episode of one seed.
fn seed_layout(config: &ExperimentConfig, seed: u64) -> Result<Vec<[f64; 2]>> {
    let mut env = config.env.clone();
    env.seed = derive_seed(seed, stream::LAYOUT, 0);
    Ok(WorldState::new(env)?.nodes().iter().map(|n| n.position).collect())
}

fn episode_world(
    config: &ExperimentConfig,
    layout: &[[f64; 2]],
    seed: u64,
    world_stream: u64,
    index: u64,
    force_jam: bool,
) -> Result<WorldState> {
    let env = world_config(config, seed, world_stream, index, force_jam);
    WorldState::from_positions(env, layout.to_vec())
}

fn world_config(
    config: &ExperimentConfig,
    seed: u64,
    world_stream: u64,
    index: u64,
    force_jam: bool,
) -> EnvConfig {
    let mut env = config.env.clone();
    env.seed = derive_seed(seed, world_stream, index);
    let mut attack = config.attack.clone();
    attack.jam_enabled |= force_jam;
    env.jam_schedule = crate::defense::jam_schedule(
        &attack,
        &env,
        &mut derived(seed ^ config.attack.seed, stream::JAMMING, (world_stream << 32) | index),
    );
    env
}

/// Defended variants train a share of episodes under jamming.
fn jam_training(config: &ExperimentConfig, seed: u64, episode: usize) -> bool {
    let p = config.defense.jam_training_probability;
    config.run.variant.defended()
        && p > 0.0
        && derived(seed, stream::JAM_TRAINING, episode as u64).random::<f64>() < p
}

/// Trains and evaluates one seed without touching the filesystem.
///
/// The seed fixes the initial node layout; each training and evaluation
/// episode starts from it with its own traffic, mobility and jamming draws.
/// All of these depend only on the seed, so variants run with the same seed
/// see the same scenarios.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    config.validate()?;
    let variant = config.run.variant;
    let hp = config.hyperparams();
    let n = config.env.n_agents;
    let layout = seed_layout(config, seed)?;
    let mut team = Team::for_env(hp.mode, n, &hp, derive_seed(seed, stream::BRAIN_INIT, 0))?;
    let mut counters = RunCounters {
        brains_constructed: team.n_brains(),
        ..RunCounters::default()
    };
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut explore = derived(seed, stream::EXPLORATION, 0);
    let mut poison_rng = derived(seed ^ config.attack.seed, stream::POISON, 0);

    let federation = if variant.federated() {
        let attackers = if config.attack.poisoning_active() {
            let mut rng = derived(seed ^ config.attack.seed, stream::ATTACKERS, 0);
            select_attackers(n, config.attack.attacker_count(n), &mut rng)
        } else {
            Vec::new()
        };
        let settings = RoundSettings {
            defense_threshold: variant.defended().then_some(config.defense.threshold),
            attackers,
            poison_mode: config.attack.poison_mode,
            poison_scale: config.attack.poison_scale,
        };
        Some((config.plan()?, settings, initial_global(&team)))
    } else {
        None
    };
    let attackers = federation
        .as_ref()
        .map(|(_, settings, _)| settings.attackers.clone())
        .unwrap_or_default();
    let mut federation = federation;
    let perturbation = variant.defended().then(|| config.defense.perturbation());

    let episodes = config.run.episodes;
    let mut records = Vec::with_capacity(episodes);
    let mut rounds = Vec::new();
    let mut diverged = false;
    for episode in 0..episodes {
        let force_jam = jam_training(config, seed, episode);
        let mut world =
            episode_world(config, &layout, seed, stream::TRAIN_WORLD, episode as u64, force_jam)?;
        let options = EpisodeOptions {
            noise_sigma: hp.sigma_at(episode, episodes),
            weights: config.weights,
            perturbation,
        };
        let stats = match train_episode(&mut team, &mut world, &hp, &mut buffer, &mut explore, &options) {
            Ok(stats) => stats,
            Err(Error::NonFinite(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        counters.update_passes += stats.update_passes;

        let mut rejections = 0;
        if let Some((plan, settings, global)) = federation.as_mut() {
            if (episode + 1) % plan.rounds_per_aggregation == 0 {
                let (next, report) = federated_round(&mut team, global, plan, settings, &mut poison_rng)?;
                counters.federated_rounds += 1;
                counters.filter_calls += report.filter_calls;
                rejections = report.roles.iter().map(|r| r.rejected.len() as u64).sum();
                *global = next;
                rounds.push(report);
            }
        }
        records.push(MetricsRecord::from_stats(seed, episode, &stats, rejections));
    }

    let summary = if diverged || !team_is_finite(&team) {
        RunSummary {
            seed,
            convergence_episode: None,
            final_window_reward: f64::NAN,
            final_latency_ms: f64::NAN,
            final_throughput: f64::NAN,
            diverged: true,
        }
    } else {
        let mut reward = 0.0;
        let mut latency_sum = 0.0;
        let mut delivered = 0u64;
        let mut throughput = 0.0;
        let evals = config.run.eval_episodes;
        for k in 0..evals {
            let mut world = episode_world(config, &layout, seed, stream::EVAL_WORLD, k as u64, false)?;
            let stats = evaluate_episode(&team, &mut world, &config.weights)?;
            reward += stats.mean_reward();
            latency_sum += stats.latency_sum_ms;
            delivered += stats.delivered;
            throughput += stats.throughput_per_s();
        }
        let rewards: Vec<f64> = records.iter().map(|r| r.mean_reward).collect();
        let denom = evals.max(1) as f64;
        RunSummary {
            seed,
            convergence_episode: detect_convergence(
                &rewards,
                config.run.convergence_window,
                config.run.convergence_tol,
            ),
            final_window_reward: reward / denom,
            final_latency_ms: if delivered == 0 { 0.0 } else { latency_sum / delivered as f64 },
            final_throughput: throughput / denom,
            diverged: false,
        }
    };
    Ok(SeedRun {
        records,
        summary,
        rounds,
        counters,
        team,
        attackers,
    })
}

fn team_is_finite(team: &Team) -> bool {
    team.brains().iter().all(|b| b.actor.is_finite() && b.critic.is_finite())
}

/// Runs every seed in parallel and writes metrics, round and summary CSVs
/// (and checkpoints when enabled) under `config.run.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    config.validate()?;
    let runs: Vec<SeedRun> = config
        .run
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<_>>()?;
    write_outputs(config, &runs)?;
    Ok(runs.into_iter().map(|r| r.summary).collect())
}

/// Writes the files of a finished experiment; seeds are kept in config order.
pub fn write_outputs(config: &ExperimentConfig, runs: &[SeedRun]) -> Result<()> {
    let dir = &config.run.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let variant = config.run.variant;
    for run in runs {
        let seed = run.summary.seed;
        write_file(&dir.join(format!("metrics_{variant}_{seed}.csv")), &output::metrics_csv(&run.records))?;
        if variant.defended() {
            write_file(
                &dir.join(format!("rounds_{variant}_{seed}.csv")),
                &output::rounds_csv(seed, &run.rounds),
            )?;
        }
        if config.run.write_checkpoints {
            for (b, brain) in run.team.brains().iter().enumerate() {
                crate::neural::write_checkpoint(
                    &dir.join(format!("actor_{variant}_{seed}_{b}.ckpt")),
                    &brain.actor.flatten(),
                )?;
                crate::neural::write_checkpoint(
                    &dir.join(format!("critic_{variant}_{seed}_{b}.ckpt")),
                    &brain.critic.flatten(),
                )?;
            }
        }
    }
    let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    write_file(&dir.join(format!("summary_{variant}.csv")), &output::summary_csv(&summaries))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
