//! Federated rounds: collect each agent's parameters, optionally poison and
//! filter them, aggregate through a two-tier hierarchy and broadcast the
//! result back to every agent.
//!
//! Aggregation is the unweighted mean `theta = (1/N) * sum_i theta_i`.
//! Groups first average their own members; the coordinator then combines
//! group means weighted by group size, which equals the flat mean.

use std::fmt;

use rand::Rng;

use crate::defense::{filter_updates, poison_update, AnomalyVerdict, PoisonMode};
use crate::error::{Error, Result};
use crate::marl::Team;
use crate::neural::FlatParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Actor,
    Critic,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Actor => "actor",
            Role::Critic => "critic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub agent_id: usize,
    pub round: u64,
    pub role: Role,
    pub params: FlatParams,
    /// Transitions trained on since the previous round; carried, not used
    /// for weighting.
    pub sample_count: u64,
}

/// Partition of agents into aggregator groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationPlan {
    groups: Vec<Vec<usize>>,
    /// Local episodes between aggregations.
    pub rounds_per_aggregation: usize,
}

impl AggregationPlan {
    pub fn new(groups: Vec<Vec<usize>>, rounds_per_aggregation: usize, n_agents: usize) -> Result<Self> {
        if rounds_per_aggregation < 1 {
            return Err(Error::config("fed.local_episodes", "must be >= 1"));
        }
        let mut seen = vec![false; n_agents];
        for group in &groups {
            if group.is_empty() {
                return Err(Error::config("fed.groups", "groups must be non-empty"));
            }
            for &a in group {
                if a >= n_agents || seen[a] {
                    return Err(Error::config(
                        "fed.groups",
                        format!("agent {a} is out of range or appears twice"),
                    ));
                }
                seen[a] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config("fed.groups", format!("agent {missing} is not assigned")));
        }
        Ok(Self {
            groups,
            rounds_per_aggregation,
        })
    }

    /// Consecutive agents in groups of `group_size`; the last may be smaller.
    pub fn contiguous(n_agents: usize, group_size: usize, rounds_per_aggregation: usize) -> Result<Self> {
        if group_size < 1 {
            return Err(Error::config("fed.group_size", "must be >= 1"));
        }
        let groups = (0..n_agents)
            .collect::<Vec<_>>()
            .chunks(group_size)
            .map(<[usize]>::to_vec)
            .collect();
        Self::new(groups, rounds_per_aggregation, n_agents)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_agents(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// The plan restricted to `kept` agents, dropping emptied groups.
    fn restricted(&self, kept: &[usize]) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| g.iter().copied().filter(|a| kept.contains(a)).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub round: u64,
    pub actor_params: FlatParams,
    pub critic_params: FlatParams,
}

/// Mean computed as the first vector plus the mean offset from it, which is
/// exact when all inputs are equal.
fn mean_of(params: &[&FlatParams]) -> FlatParams {
    let n = params.len() as f64;
    let anchor = params[0].values();
    let mut acc = vec![0.0; anchor.len()];
    for p in &params[1..] {
        for ((a, v), base) in acc.iter_mut().zip(p.values()).zip(anchor) {
            *a += v - base;
        }
    }
    let mean = acc.iter().zip(anchor).map(|(a, base)| base + a / n).collect();
    params[0].with_values(mean).expect("same layout")
}

fn check_compatible(updates: &[&ModelUpdate]) -> Result<()> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Aggregation("no updates to aggregate".into()))?;
    for u in updates {
        if u.role != first.role {
            return Err(Error::Aggregation(format!(
                "mixed roles: {} and {}",
                first.role, u.role
            )));
        }
        if u.round != first.round {
            return Err(Error::Aggregation(format!(
                "mixed rounds: {} and {}",
                first.round, u.round
            )));
        }
        if u.params.shapes() != first.params.shapes() {
            return Err(Error::Aggregation(format!(
                "mixed parameter layouts: {} and {} values",
                first.params.len(),
                u.params.len()
            )));
        }
    }
    Ok(())
}

/// Componentwise unweighted mean of the updates' parameters.
pub fn fedavg(updates: &[ModelUpdate]) -> Result<FlatParams> {
    let refs: Vec<&ModelUpdate> = updates.iter().collect();
    fedavg_refs(&refs)
}

fn fedavg_refs(updates: &[&ModelUpdate]) -> Result<FlatParams> {
    check_compatible(updates)?;
    let params: Vec<&FlatParams> = updates.iter().map(|u| &u.params).collect();
    Ok(mean_of(&params))
}

/// Per-group mean, then the group-size-weighted mean of group results.
pub fn hierarchical_aggregate(updates: &[ModelUpdate], plan: &AggregationPlan) -> Result<FlatParams> {
    aggregate_groups(updates, plan.groups())
}

fn aggregate_groups(updates: &[ModelUpdate], groups: &[Vec<usize>]) -> Result<FlatParams> {
    if groups.is_empty() {
        return Err(Error::Aggregation("no groups to aggregate".into()));
    }
    let all: Vec<&ModelUpdate> = updates.iter().collect();
    check_compatible(&all)?;
    let total: usize = groups.iter().map(Vec::len).sum();
    let mut anchor: Option<FlatParams> = None;
    let mut acc = vec![0.0; updates[0].params.len()];
    for group in groups {
        if group.is_empty() {
            return Err(Error::Aggregation("empty aggregator group".into()));
        }
        let members = group
            .iter()
            .map(|&a| {
                updates
                    .iter()
                    .find(|u| u.agent_id == a)
                    .ok_or_else(|| Error::Aggregation(format!("missing update from agent {a}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let group_mean = fedavg_refs(&members)?;
        let weight = group.len() as f64 / total as f64;
        let base = anchor.get_or_insert_with(|| group_mean.clone());
        for ((a, v), b) in acc.iter_mut().zip(group_mean.values()).zip(base.values()) {
            *a += weight * (v - b);
        }
    }
    let base = anchor.expect("at least one group");
    let combined = acc.iter().zip(base.values()).map(|(a, b)| b + a).collect();
    base.with_values(combined)
}

/// Overwrites every online actor and critic with the global parameters.
/// Target networks are left to soft-track the new online weights.
pub fn broadcast(global: &GlobalModel, team: &mut Team) -> Result<()> {
    for brain in team.brains() {
        if brain.actor.param_count() != global.actor_params.len()
            || brain.critic.param_count() != global.critic_params.len()
        {
            return Err(Error::DimensionMismatch {
                context: "broadcast",
                expected: brain.actor.param_count(),
                actual: global.actor_params.len(),
            });
        }
    }
    for brain in team.brains_mut() {
        brain.actor.set_params(global.actor_params.values())?;
        brain.critic.set_params(global.critic_params.values())?;
    }
    Ok(())
}

/// Parameters of every brain for one role.
pub fn collect_updates(team: &Team, role: Role, round: u64) -> Vec<ModelUpdate> {
    team.brains()
        .iter()
        .enumerate()
        .map(|(agent_id, brain)| ModelUpdate {
            agent_id,
            round,
            role,
            params: match role {
                Role::Actor => brain.actor.flatten(),
                Role::Critic => brain.critic.flatten(),
            },
            sample_count: brain.samples_since_sync,
        })
        .collect()
}

/// How a round treats attackers and anomalies.
#[derive(Debug, Clone)]
pub struct RoundSettings {
    /// `Some(threshold)` enables anomaly filtering.
    pub defense_threshold: Option<f64>,
    /// Agents whose submitted updates are poisoned.
    pub attackers: Vec<usize>,
    pub poison_mode: PoisonMode,
    pub poison_scale: f64,
}

impl RoundSettings {
    pub fn benign(defense_threshold: Option<f64>) -> Self {
        Self {
            defense_threshold,
            attackers: Vec::new(),
            poison_mode: PoisonMode::SignFlipScaled,
            poison_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleReport {
    pub role: Role,
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
    pub verdicts: Vec<AnomalyVerdict>,
    /// The filter accepted nothing; this role kept its previous parameters.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u64,
    pub roles: Vec<RoleReport>,
    pub filter_calls: usize,
}

impl RoundReport {
    /// Agents with at least one rejected update.
    pub fn rejected_agents(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.roles.iter().flat_map(|r| r.rejected.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn stalled(&self) -> bool {
        self.roles.iter().any(|r| r.stalled)
    }
}

/// One federated synchronisation of `team`.
///
/// Attackers' submissions are poisoned, survivors of the optional filter are
/// aggregated over the plan restricted to them, and the result is broadcast
/// role by role. If the filter accepts nothing for a role, that role is
/// neither aggregated nor broadcast and the previous global parameters are
/// retained.
pub fn federated_round<R: Rng + ?Sized>(
    team: &mut Team,
    previous: &GlobalModel,
    plan: &AggregationPlan,
    settings: &RoundSettings,
    rng: &mut R,
) -> Result<(GlobalModel, RoundReport)> {
    if plan.n_agents() != team.n_brains() {
        return Err(Error::DimensionMismatch {
            context: "aggregation plan",
            expected: team.n_brains(),
            actual: plan.n_agents(),
        });
    }
    let round = previous.round + 1;
    let mut report = RoundReport {
        round,
        roles: Vec::with_capacity(2),
        filter_calls: 0,
    };
    let mut next = GlobalModel {
        round,
        actor_params: previous.actor_params.clone(),
        critic_params: previous.critic_params.clone(),
    };
    for role in [Role::Actor, Role::Critic] {
        let mut updates = collect_updates(team, role, round);
        for u in updates.iter_mut() {
            if settings.attackers.contains(&u.agent_id) {
                *u = poison_update(u, settings.poison_mode, settings.poison_scale, rng);
            }
        }
        let all_ids: Vec<usize> = updates.iter().map(|u| u.agent_id).collect();
        let (survivors, verdicts, stalled) = match settings.defense_threshold {
            Some(threshold) => {
                report.filter_calls += 1;
                let outcome = filter_updates(updates, threshold);
                let stalled = outcome.fallback;
                (outcome.accepted, outcome.verdicts, stalled)
            }
            None => (updates, Vec::new(), false),
        };
        let accepted: Vec<usize> = if stalled {
            Vec::new()
        } else {
            survivors.iter().map(|u| u.agent_id).collect()
        };
        let rejected = all_ids.into_iter().filter(|a| !accepted.contains(a)).collect();
        if !stalled {
            let aggregated = aggregate_groups(&survivors, &plan.restricted(&accepted))?;
            for brain in team.brains_mut() {
                match role {
                    Role::Actor => brain.actor.set_params(aggregated.values())?,
                    Role::Critic => brain.critic.set_params(aggregated.values())?,
                }
            }
            match role {
                Role::Actor => next.actor_params = aggregated,
                Role::Critic => next.critic_params = aggregated,
            }
        }
        report.roles.push(RoleReport {
            role,
            accepted,
            rejected,
            verdicts,
            stalled,
        });
    }
    for brain in team.brains_mut() {
        brain.samples_since_sync = 0;
    }
    Ok((next, report))
}

/// Global model seeded from brain 0, used before the first round.
pub fn initial_global(team: &Team) -> GlobalModel {
    let brain = &team.brains()[0];
    GlobalModel {
        round: 0,
        actor_params: brain.actor.flatten(),
        critic_params: brain.critic.flatten(),
    }
}

#[cfg(test)]
#[path = "federation_tests.rs"]
mod tests;
