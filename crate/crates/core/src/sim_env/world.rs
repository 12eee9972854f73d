use std::collections::VecDeque;
use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use super::config::EnvConfig;
use super::types::{
    ActionVector, DecodedAction, LinkState, NodeState, Observation, Packet, PacketLedger,
    StepOutcome,
};
use super::{observation_dim, NEIGHBOR_SLOTS};
use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

const NO_LINK: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    config: EnvConfig,
    nodes: Vec<NodeState>,
    links: Vec<LinkState>,
    /// Dense `n x n` index into `links`.
    link_index: Vec<usize>,
    step: usize,
    next_packet_id: u64,
    ledger: PacketLedger,
    rng: SimRng,
}

impl WorldState {
    /// Positions are drawn uniformly from the area using `config.seed`; the
    /// first `n_gateways` nodes are gateways.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed);
        let positions = (0..config.n_agents)
            .map(|_| {
                [
                    rng.random::<f64>() * config.area_km,
                    rng.random::<f64>() * config.area_km,
                ]
            })
            .collect::<Vec<_>>();
        Ok(Self::assemble(config, positions, rng))
    }

    /// Builds a world with explicit node positions (fixtures, replays). The
    /// generator is still seeded from `config.seed`.
    pub fn from_positions(config: EnvConfig, positions: Vec<[f64; 2]>) -> Result<Self> {
        config.validate()?;
        if positions.len() != config.n_agents {
            return Err(Error::DimensionMismatch {
                context: "node positions",
                expected: config.n_agents,
                actual: positions.len(),
            });
        }
        for p in &positions {
            if !(0.0..=config.area_km).contains(&p[0]) || !(0.0..=config.area_km).contains(&p[1])
            {
                return Err(Error::config("positions", "must lie inside the area"));
            }
        }
        let rng = seeded(config.seed);
        Ok(Self::assemble(config, positions, rng))
    }

    fn assemble(config: EnvConfig, positions: Vec<[f64; 2]>, rng: SimRng) -> Self {
        let n = config.n_agents;
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| NodeState {
                position,
                velocity: [0.0, 0.0],
                battery: 1.0,
                queue: VecDeque::new(),
                is_gateway: i < config.n_gateways,
                compromised: false,
            })
            .collect();
        let mut world = Self {
            config,
            nodes,
            links: Vec::new(),
            link_index: vec![NO_LINK; n * n],
            step: 0,
            next_packet_id: 0,
            ledger: PacketLedger::default(),
            rng,
        };
        world.recompute_links(0);
        world
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.episode_len
    }

    pub fn ledger(&self) -> PacketLedger {
        self.ledger
    }

    pub fn n_agents(&self) -> usize {
        self.nodes.len()
    }

    /// Packets currently queued anywhere in the network.
    pub fn in_flight(&self) -> u64 {
        self.nodes.iter().map(|n| n.queue.len() as u64).sum()
    }

    pub fn set_compromised(&mut self, agent: usize, compromised: bool) -> Result<()> {
        self.check_agent(agent)?;
        self.nodes[agent].compromised = compromised;
        Ok(())
    }

    pub fn link(&self, a: usize, b: usize) -> Option<&LinkState> {
        let n = self.nodes.len();
        if a >= n || b >= n {
            return None;
        }
        match self.link_index[a * n + b] {
            NO_LINK => None,
            idx => Some(&self.links[idx]),
        }
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.nodes.len() {
            return Err(Error::AgentOutOfRange {
                agent,
                n_agents: self.nodes.len(),
            });
        }
        Ok(())
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let pa = self.nodes[a].position;
        let pb = self.nodes[b].position;
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    /// Up to `NEIGHBOR_SLOTS` in-range nodes, nearest first, ties to the
    /// lower index.
    pub fn neighbors(&self, agent: usize) -> Vec<usize> {
        let mut within: Vec<(f64, usize)> = self
            .links
            .iter()
            .filter_map(|l| {
                if l.endpoints.0 == agent {
                    Some((l.distance_km, l.endpoints.1))
                } else if l.endpoints.1 == agent {
                    Some((l.distance_km, l.endpoints.0))
                } else {
                    None
                }
            })
            .collect();
        within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        within.truncate(NEIGHBOR_SLOTS);
        within.into_iter().map(|(_, j)| j).collect()
    }

    fn gateway_distance(&self, agent: usize) -> f64 {
        let p = self.nodes[agent].position;
        self.nodes
            .iter()
            .filter(|n| n.is_gateway)
            .map(|g| ((g.position[0] - p[0]).powi(2) + (g.position[1] - p[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn normalized_gateway_distance(&self, agent: usize) -> f64 {
        (self.gateway_distance(agent) / (self.config.area_km * SQRT_2)).clamp(0.0, 1.0)
    }

    fn queue_fill(&self, agent: usize) -> f64 {
        (self.nodes[agent].queue.len() as f64 / self.config.queue_capacity as f64).min(1.0)
    }

    pub fn observe(&self, agent: usize) -> Result<Observation> {
        self.check_agent(agent)?;
        let mut v = vec![0.0; observation_dim()];
        v[Observation::BATTERY] = self.nodes[agent].battery.clamp(0.0, 1.0);
        v[Observation::QUEUE_FILL] = self.queue_fill(agent);
        for (slot, &j) in self.neighbors(agent).iter().enumerate() {
            let link = self.link(agent, j).expect("neighbor implies link");
            v[Observation::LINK_QUALITY + slot] = link.quality;
            v[Observation::NEIGHBOR_QUEUE + slot] = self.queue_fill(j);
            v[Observation::NEIGHBOR_GATEWAY + slot] = 1.0 - self.normalized_gateway_distance(j);
        }
        v[Observation::GATEWAY_DISTANCE] = self.normalized_gateway_distance(agent);
        let jammed = self
            .links
            .iter()
            .any(|l| l.jammed && (l.endpoints.0 == agent || l.endpoints.1 == agent));
        v[Observation::JAM] = if jammed { 1.0 } else { 0.0 };
        Ok(Observation::from_raw(v))
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.nodes.len())
            .map(|i| self.observe(i).expect("index in range"))
            .collect()
    }

    /// Advances one step: decode actions, generate traffic, forward, deliver
    /// at gateways, move nodes, then rebuild links for the next step.
    pub fn step(&mut self, actions: &[ActionVector]) -> Result<StepOutcome> {
        let n = self.nodes.len();
        if actions.len() != n {
            return Err(Error::DimensionMismatch {
                context: "actions per step",
                expected: n,
                actual: actions.len(),
            });
        }
        if self.is_done() {
            return Err(Error::EpisodeOver(self.step));
        }
        let mut outcome = StepOutcome::empty(n, self.config.step_seconds);

        let neighbor_lists: Vec<Vec<usize>> = (0..n).map(|i| self.neighbors(i)).collect();
        let decoded: Vec<DecodedAction> = actions
            .iter()
            .zip(&neighbor_lists)
            .map(|(a, nb)| a.decode(nb.len()))
            .collect();

        self.generate_traffic(&mut outcome);
        let arrivals = self.forward(&neighbor_lists, &decoded, &mut outcome);
        self.deliver(arrivals, &mut outcome);
        self.move_nodes();
        self.recompute_links(self.step + 1);
        self.step += 1;

        self.ledger.generated += outcome.generated;
        self.ledger.delivered += outcome.delivered;
        self.ledger.dropped += outcome.dropped;
        Ok(outcome)
    }

    fn generate_traffic(&mut self, outcome: &mut StepOutcome) {
        let rate = self.config.traffic_rate;
        let limit = (-rate).exp();
        for i in 0..self.nodes.len() {
            if self.nodes[i].is_gateway {
                continue;
            }
            // Knuth's product-of-uniforms Poisson sampler.
            let mut count = 0u64;
            let mut product = self.rng.random::<f64>();
            while product > limit {
                count += 1;
                product *= self.rng.random::<f64>();
            }
            for _ in 0..count {
                outcome.generated += 1;
                outcome.generated_by_source[i] += 1;
                let packet = Packet {
                    id: self.next_packet_id,
                    src: i,
                    created_step: self.step,
                    hops: 0,
                    size: 1,
                };
                self.next_packet_id += 1;
                if self.nodes[i].queue.len() < self.config.queue_capacity {
                    self.nodes[i].queue.push_back(packet);
                } else {
                    outcome.dropped += 1;
                }
            }
        }
    }

    /// Senders draw from their queues as they stood before any arrivals this
    /// step; successful packets are returned with their receiver.
    fn forward(
        &mut self,
        neighbor_lists: &[Vec<usize>],
        decoded: &[DecodedAction],
        outcome: &mut StepOutcome,
    ) -> Vec<(usize, Packet)> {
        let n = self.nodes.len();
        let mut link_use = vec![0usize; n * n];
        let mut arrivals = Vec::new();
        for i in 0..n {
            if self.nodes[i].is_gateway || self.nodes[i].battery <= 0.0 {
                continue;
            }
            let action = decoded[i];
            let Some(slot) = action.slot else { continue };
            let j = neighbor_lists[i][slot];
            let queued = self.nodes[i].queue.len();
            let wanted = (action.transmit_fraction * queued as f64).round() as usize;
            let key = i.min(j) * n + i.max(j);
            let budget = self.config.base_capacity.saturating_sub(link_use[key]);
            let sending = wanted.min(budget).min(queued);
            if sending == 0 {
                continue;
            }
            link_use[key] += sending;

            let link = self.link(i, j).expect("neighbor implies link");
            let p_success = link.quality * (0.5 + 0.5 * action.power);
            if link.jammed {
                outcome.adversarial_detected[i] = true;
            }
            for _ in 0..sending {
                let mut packet = self.nodes[i].queue.pop_front().expect("sending <= queued");
                if self.rng.random::<f64>() < p_success {
                    packet.hops += 1;
                    arrivals.push((j, packet));
                } else {
                    outcome.dropped += 1;
                }
            }
            let node = &mut self.nodes[i];
            node.battery =
                (node.battery - self.config.battery_drain * action.power * sending as f64).max(0.0);
        }
        arrivals
    }

    fn deliver(&mut self, arrivals: Vec<(usize, Packet)>, outcome: &mut StepOutcome) {
        let ms_per_step = self.config.step_seconds * 1000.0;
        for (j, packet) in arrivals {
            if self.nodes[j].is_gateway {
                outcome.delivered += 1;
                outcome.delivered_by_source[packet.src] += 1;
                outcome.delivered_latency_sum_ms +=
                    (self.step - packet.created_step) as f64 * ms_per_step;
            } else if self.nodes[j].queue.len() < self.config.queue_capacity {
                self.nodes[j].queue.push_back(packet);
            } else {
                outcome.dropped += 1;
            }
        }
    }

    /// Reflecting random walk; velocity is redrawn every step.
    fn move_nodes(&mut self) {
        let max_step = self.config.mobility_speed_kmps * self.config.step_seconds;
        let area = self.config.area_km;
        for node in self.nodes.iter_mut() {
            let speed = self.rng.random::<f64>() * max_step;
            let heading = self.rng.random::<f64>() * 2.0 * PI;
            let mut velocity = [speed * heading.cos(), speed * heading.sin()];
            for axis in 0..2 {
                let mut x = node.position[axis] + velocity[axis];
                if x < 0.0 {
                    x = -x;
                    velocity[axis] = -velocity[axis];
                } else if x > area {
                    x = 2.0 * area - x;
                    velocity[axis] = -velocity[axis];
                }
                node.position[axis] = x.clamp(0.0, area);
            }
            node.velocity = velocity;
        }
    }

    fn recompute_links(&mut self, step: usize) {
        let n = self.nodes.len();
        let range = self.config.link_range_km;
        self.links.clear();
        self.link_index.iter_mut().for_each(|x| *x = NO_LINK);
        for a in 0..n {
            for b in (a + 1)..n {
                let d = self.distance(a, b);
                if d <= range {
                    let idx = self.links.len();
                    self.links.push(LinkState {
                        endpoints: (a, b),
                        distance_km: d,
                        quality: base_quality(d, range),
                        jammed: false,
                    });
                    self.link_index[a * n + b] = idx;
                    self.link_index[b * n + a] = idx;
                }
            }
        }
        self.jam_links(step);
    }

    /// Resets every link to its distance-based quality, then applies each
    /// jam event active at the current step.
    pub fn apply_jamming(&mut self) {
        self.jam_links(self.step);
    }

    fn jam_links(&mut self, step: usize) {
        let range = self.config.link_range_km;
        for link in self.links.iter_mut() {
            link.quality = base_quality(link.distance_km, range);
            link.jammed = false;
        }
        for event in self.config.jam_schedule.iter().filter(|e| e.is_active(step)) {
            for link in self.links.iter_mut() {
                let (a, b) = link.endpoints;
                if event.covers(self.nodes[a].position) || event.covers(self.nodes[b].position) {
                    link.quality = (link.quality - event.loss_boost).max(0.0);
                    link.jammed = true;
                }
            }
        }
    }
}

#[cfg(test)]
#[path = "world_tests.rs"]
mod tests;

fn base_quality(distance_km: f64, range_km: f64) -> f64 {
    (1.0 - distance_km / range_km).clamp(0.0, 1.0)
}
