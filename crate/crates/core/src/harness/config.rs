//! Experiment configuration in a flat `section.key = value` text format.
//!
//! Blank lines and `#` comments are ignored. Keys not listed in
//! [`ExperimentConfig::render`] output are rejected, as are duplicates; keys
//! that are absent keep their defaults. Lists are comma separated.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::defense::{AttackConfig, PoisonMode, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::federation::AggregationPlan;
use crate::marl::{Hyperparams, Mode, Perturbation};
use crate::sim_env::{EnvConfig, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// MADDPG + hierarchical federation + defense layer.
    EdgeAgentX,
    /// EdgeAgentX with filtering and adversarial training disabled.
    NoDefense,
    /// Independent critics with federation.
    FedNoMarl,
    /// Independent DDPG per agent, no federation.
    Independent,
    /// A single learner observing and acting for the whole network.
    Centralized,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::EdgeAgentX,
        Variant::NoDefense,
        Variant::FedNoMarl,
        Variant::Independent,
        Variant::Centralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::EdgeAgentX => "EDGEAGENTX",
            Variant::NoDefense => "NO_DEFENSE",
            Variant::FedNoMarl => "FED_NO_MARL",
            Variant::Independent => "INDEPENDENT",
            Variant::Centralized => "CENTRALIZED",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Variant::EdgeAgentX | Variant::NoDefense => Mode::Maddpg,
            Variant::FedNoMarl => Mode::FedNoMarl,
            Variant::Independent => Mode::Independent,
            Variant::Centralized => Mode::Centralized,
        }
    }

    pub fn federated(self) -> bool {
        matches!(self, Variant::EdgeAgentX | Variant::NoDefense | Variant::FedNoMarl)
    }

    /// Anomaly filtering and adversarial training.
    pub fn defended(self) -> bool {
        matches!(self, Variant::EdgeAgentX)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == upper)
            .ok_or_else(|| format!("unknown variant '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    /// Local episodes between aggregations.
    pub local_episodes: usize,
    /// Agents per first-tier aggregator.
    pub group_size: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            local_episodes: 2,
            group_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig {
    pub threshold: f64,
    pub perturb_probability: f64,
    pub perturb_epsilon: f64,
    /// Share of training episodes run under the attack jamming pattern even
    /// when the scenario itself is not jammed.
    pub jam_training_probability: f64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            perturb_probability: 0.25,
            perturb_epsilon: 0.05,
            jam_training_probability: 0.25,
        }
    }
}

impl DefenseConfig {
    pub fn perturbation(&self) -> Perturbation {
        Perturbation {
            probability: self.perturb_probability,
            epsilon: self.perturb_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub eval_episodes: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub write_checkpoints: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::EdgeAgentX,
            episodes: 1000,
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("results"),
            eval_episodes: 20,
            convergence_window: 25,
            convergence_tol: 0.02,
            write_checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub hyper: Hyperparams,
    pub fed: FederationConfig,
    pub weights: RewardWeights,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Scaled-down scenario used by the acceptance suite: 8 agents, 300
    /// episodes, 5 seeds, with smaller networks and sparser updates.
    pub fn desk_scale() -> Self {
        let text = include_str!("../../../../configs/desk.conf");
        parse_config(text).expect("bundled desk config is valid")
    }

    /// The variant decides the learning mode.
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            mode: self.run.variant.mode(),
            ..self.hyper.clone()
        }
    }

    pub fn plan(&self) -> Result<AggregationPlan> {
        AggregationPlan::contiguous(self.env.n_agents, self.fed.group_size, self.fed.local_episodes)
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        let mut c = self.clone();
        c.run.variant = variant;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.hyper.validate()?;
        self.attack.validate()?;
        self.plan()?;
        if self.run.episodes < 1 {
            return Err(Error::config("run.episodes", "must be >= 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "must be non-empty"));
        }
        if self.run.convergence_window < 1 {
            return Err(Error::config("run.convergence_window", "must be >= 1"));
        }
        if !(self.run.convergence_tol >= 0.0) {
            return Err(Error::config("run.convergence_tol", "must be >= 0"));
        }
        if !(self.defense.threshold >= 0.0) {
            return Err(Error::config("defense.threshold", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.defense.perturb_probability) {
            return Err(Error::config("defense.perturb_probability", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.defense.jam_training_probability) {
            return Err(Error::config("defense.jam_training_probability", "must lie in [0, 1]"));
        }
        if !(self.defense.perturb_epsilon >= 0.0) {
            return Err(Error::config("defense.perturb_epsilon", "must be >= 0"));
        }
        for (key, w) in [
            ("reward.alpha", self.weights.alpha),
            ("reward.beta", self.weights.beta),
            ("reward.gamma", self.weights.gamma),
            ("reward.delta", self.weights.delta),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Every key, one per line, in a form `parse_config` reads back exactly.
    pub fn render(&self) -> String {
        let e = &self.env;
        let h = &self.hyper;
        let a = &self.attack;
        let r = &self.run;
        let seeds = r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let lines: Vec<(&str, String)> = vec![
            ("run.variant", r.variant.to_string()),
            ("run.episodes", r.episodes.to_string()),
            ("run.seeds", seeds),
            ("run.output_dir", r.output_dir.display().to_string()),
            ("run.eval_episodes", r.eval_episodes.to_string()),
            ("run.convergence_window", r.convergence_window.to_string()),
            ("run.convergence_tol", r.convergence_tol.to_string()),
            ("run.write_checkpoints", r.write_checkpoints.to_string()),
            ("env.n_agents", e.n_agents.to_string()),
            ("env.area_km", e.area_km.to_string()),
            ("env.episode_len", e.episode_len.to_string()),
            ("env.step_seconds", e.step_seconds.to_string()),
            ("env.n_gateways", e.n_gateways.to_string()),
            ("env.traffic_rate", e.traffic_rate.to_string()),
            ("env.link_range_km", e.link_range_km.to_string()),
            ("env.base_capacity", e.base_capacity.to_string()),
            ("env.mobility_speed_kmps", e.mobility_speed_kmps.to_string()),
            ("env.queue_capacity", e.queue_capacity.to_string()),
            ("env.battery_drain", e.battery_drain.to_string()),
            ("hyper.discount", h.discount.to_string()),
            ("hyper.soft_tau", h.soft_tau.to_string()),
            ("hyper.batch_size", h.batch_size.to_string()),
            ("hyper.noise_sigma", h.noise_sigma.to_string()),
            ("hyper.noise_sigma_final", h.noise_sigma_final.to_string()),
            ("hyper.actor_lr", h.actor_lr.to_string()),
            ("hyper.critic_lr", h.critic_lr.to_string()),
            ("hyper.actor_hidden", h.actor_hidden.to_string()),
            ("hyper.critic_hidden", h.critic_hidden.to_string()),
            ("hyper.buffer_capacity", h.buffer_capacity.to_string()),
            ("hyper.update_every", h.update_every.to_string()),
            ("hyper.reward_scale", h.reward_scale.to_string()),
            ("hyper.actor_preact_reg", h.actor_preact_reg.to_string()),
            ("fed.local_episodes", self.fed.local_episodes.to_string()),
            ("fed.group_size", self.fed.group_size.to_string()),
            ("reward.alpha", self.weights.alpha.to_string()),
            ("reward.beta", self.weights.beta.to_string()),
            ("reward.gamma", self.weights.gamma.to_string()),
            ("reward.delta", self.weights.delta.to_string()),
            ("attack.poison_fraction", a.poison_fraction.to_string()),
            ("attack.poison_mode", a.poison_mode.to_string()),
            ("attack.poison_scale", a.poison_scale.to_string()),
            ("attack.jam_enabled", a.jam_enabled.to_string()),
            ("attack.jam_period", a.jam_period.to_string()),
            ("attack.jam_duration", a.jam_duration.to_string()),
            ("attack.jam_radius_km", a.jam_radius_km.to_string()),
            ("attack.jam_loss_boost", a.jam_loss_boost.to_string()),
            ("attack.seed", a.seed.to_string()),
            ("defense.threshold", self.defense.threshold.to_string()),
            ("defense.perturb_probability", self.defense.perturb_probability.to_string()),
            ("defense.perturb_epsilon", self.defense.perturb_epsilon.to_string()),
            ("defense.jam_training_probability", self.defense.jam_training_probability.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::ConfigParse {
        line,
        message: format!("{key}: cannot parse '{raw}': {e}"),
    })
}

fn set(config: &mut ExperimentConfig, line: usize, key: &str, raw: &str) -> Result<()> {
    let c = config;
    match key {
        "run.variant" => c.run.variant = value(line, key, raw)?,
        "run.episodes" => c.run.episodes = value(line, key, raw)?,
        "run.seeds" => {
            c.run.seeds = raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| value(line, key, s))
                .collect::<Result<_>>()?
        }
        "run.output_dir" => c.run.output_dir = PathBuf::from(raw),
        "run.eval_episodes" => c.run.eval_episodes = value(line, key, raw)?,
        "run.convergence_window" => c.run.convergence_window = value(line, key, raw)?,
        "run.convergence_tol" => c.run.convergence_tol = value(line, key, raw)?,
        "run.write_checkpoints" => c.run.write_checkpoints = value(line, key, raw)?,
        "env.n_agents" => c.env.n_agents = value(line, key, raw)?,
        "env.area_km" => c.env.area_km = value(line, key, raw)?,
        "env.episode_len" => c.env.episode_len = value(line, key, raw)?,
        "env.step_seconds" => c.env.step_seconds = value(line, key, raw)?,
        "env.n_gateways" => c.env.n_gateways = value(line, key, raw)?,
        "env.traffic_rate" => c.env.traffic_rate = value(line, key, raw)?,
        "env.link_range_km" => c.env.link_range_km = value(line, key, raw)?,
        "env.base_capacity" => c.env.base_capacity = value(line, key, raw)?,
        "env.mobility_speed_kmps" => c.env.mobility_speed_kmps = value(line, key, raw)?,
        "env.queue_capacity" => c.env.queue_capacity = value(line, key, raw)?,
        "env.battery_drain" => c.env.battery_drain = value(line, key, raw)?,
        "hyper.discount" => c.hyper.discount = value(line, key, raw)?,
        "hyper.soft_tau" => c.hyper.soft_tau = value(line, key, raw)?,
        "hyper.batch_size" => c.hyper.batch_size = value(line, key, raw)?,
        "hyper.noise_sigma" => c.hyper.noise_sigma = value(line, key, raw)?,
        "hyper.noise_sigma_final" => c.hyper.noise_sigma_final = value(line, key, raw)?,
        "hyper.actor_lr" => c.hyper.actor_lr = value(line, key, raw)?,
        "hyper.critic_lr" => c.hyper.critic_lr = value(line, key, raw)?,
        "hyper.actor_hidden" => c.hyper.actor_hidden = value(line, key, raw)?,
        "hyper.critic_hidden" => c.hyper.critic_hidden = value(line, key, raw)?,
        "hyper.buffer_capacity" => c.hyper.buffer_capacity = value(line, key, raw)?,
        "hyper.update_every" => c.hyper.update_every = value(line, key, raw)?,
        "hyper.reward_scale" => c.hyper.reward_scale = value(line, key, raw)?,
        "hyper.actor_preact_reg" => c.hyper.actor_preact_reg = value(line, key, raw)?,
        "fed.local_episodes" => c.fed.local_episodes = value(line, key, raw)?,
        "fed.group_size" => c.fed.group_size = value(line, key, raw)?,
        "reward.alpha" => c.weights.alpha = value(line, key, raw)?,
        "reward.beta" => c.weights.beta = value(line, key, raw)?,
        "reward.gamma" => c.weights.gamma = value(line, key, raw)?,
        "reward.delta" => c.weights.delta = value(line, key, raw)?,
        "attack.poison_fraction" => c.attack.poison_fraction = value(line, key, raw)?,
        "attack.poison_mode" => c.attack.poison_mode = value::<PoisonMode>(line, key, raw)?,
        "attack.poison_scale" => c.attack.poison_scale = value(line, key, raw)?,
        "attack.jam_enabled" => c.attack.jam_enabled = value(line, key, raw)?,
        "attack.jam_period" => c.attack.jam_period = value(line, key, raw)?,
        "attack.jam_duration" => c.attack.jam_duration = value(line, key, raw)?,
        "attack.jam_radius_km" => c.attack.jam_radius_km = value(line, key, raw)?,
        "attack.jam_loss_boost" => c.attack.jam_loss_boost = value(line, key, raw)?,
        "attack.seed" => c.attack.seed = value(line, key, raw)?,
        "defense.threshold" => c.defense.threshold = value(line, key, raw)?,
        "defense.perturb_probability" => c.defense.perturb_probability = value(line, key, raw)?,
        "defense.perturb_epsilon" => c.defense.perturb_epsilon = value(line, key, raw)?,
        "defense.jam_training_probability" => {
            c.defense.jam_training_probability = value(line, key, raw)?
        }
        _ => {
            return Err(Error::ConfigParse {
                line,
                message: format!("unknown key '{key}'"),
            })
        }
    }
    Ok(())
}

/// Parses and validates a config; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            message: format!("expected 'section.key = value', found '{line}'"),
        })?;
        let key = key.trim();
        let raw = raw.trim();
        if !key.contains('.') {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("key '{key}' must be of the form section.key"),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
        }
        set(&mut config, line_no, key, raw)?;
    }
    config.validate()?;
    Ok(config)
}
