use std::collections::VecDeque;

use super::{action_dim, observation_dim, NEIGHBOR_SLOTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub src: usize,
    pub created_step: usize,
    pub hops: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub position: [f64; 2],
    /// Displacement applied by the last mobility update, in km per step.
    pub velocity: [f64; 2],
    pub battery: f64,
    pub queue: VecDeque<Packet>,
    pub is_gateway: bool,
    pub compromised: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    /// Endpoints with `endpoints.0 < endpoints.1`.
    pub endpoints: (usize, usize),
    pub distance_km: f64,
    /// Delivery probability at full power after jamming.
    pub quality: f64,
    pub jammed: bool,
}

/// Running totals since the world was created.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PacketLedger {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub delivered: u64,
    pub delivered_latency_sum_ms: f64,
    pub generated: u64,
    /// Generated packets indexed by originating node.
    pub generated_by_source: Vec<u64>,
    /// Link losses, queue overflows and losses on jammed links.
    pub dropped: u64,
    /// Agents that attempted a transmission over a jammed link this step.
    pub adversarial_detected: Vec<bool>,
    /// Delivered packets indexed by originating node.
    pub delivered_by_source: Vec<u64>,
    pub step_seconds: f64,
}

impl StepOutcome {
    pub(crate) fn empty(n_agents: usize, step_seconds: f64) -> Self {
        Self {
            delivered: 0,
            delivered_latency_sum_ms: 0.0,
            generated: 0,
            generated_by_source: vec![0; n_agents],
            dropped: 0,
            adversarial_detected: vec![false; n_agents],
            delivered_by_source: vec![0; n_agents],
            step_seconds,
        }
    }

    /// Zero when nothing was delivered.
    pub fn mean_latency_ms(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.delivered_latency_sum_ms / self.delivered as f64
        }
    }
}

/// Local view of one agent. Layout:
///
/// | index            | feature                                        |
/// |------------------|------------------------------------------------|
/// | 0                | battery                                        |
/// | 1                | queue fill fraction                            |
/// | 2..2+K           | link quality per neighbor slot                 |
/// | 2+K..2+2K        | queue fill per neighbor slot                   |
/// | 2+2K..2+3K       | gateway proximity per neighbor slot            |
/// | 2+3K             | own normalized distance to nearest gateway     |
/// | 3+3K             | jam indicator                                  |
///
/// Neighbor slots are ordered by distance, ties to the lower index, and
/// zero-padded. Every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub const BATTERY: usize = 0;
    pub const QUEUE_FILL: usize = 1;
    pub const LINK_QUALITY: usize = 2;
    pub const NEIGHBOR_QUEUE: usize = 2 + NEIGHBOR_SLOTS;
    pub const NEIGHBOR_GATEWAY: usize = 2 + 2 * NEIGHBOR_SLOTS;
    pub const GATEWAY_DISTANCE: usize = 2 + 3 * NEIGHBOR_SLOTS;
    pub const JAM: usize = 3 + 3 * NEIGHBOR_SLOTS;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != observation_dim() {
            return Err(Error::DimensionMismatch {
                context: "observation",
                expected: observation_dim(),
                actual: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), observation_dim());
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn link_quality(&self, slot: usize) -> f64 {
        self.0[Self::LINK_QUALITY + slot]
    }
}

/// Continuous decision vector in `[-1, 1]^d`: transmit fraction, one logit
/// per neighbor slot, then transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector(Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedAction {
    /// Share of the queue to send, in `[0, 1]`.
    pub transmit_fraction: f64,
    /// Index of the preferred slot among the first `available` slots.
    pub slot: Option<usize>,
    /// Power level in `[0, 1]`.
    pub power: f64,
}

impl ActionVector {
    pub const TRANSMIT: usize = 0;
    pub const LOGITS: usize = 1;
    pub const POWER: usize = 1 + NEIGHBOR_SLOTS;

    /// Components are clamped into `[-1, 1]`; NaN becomes 0.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != action_dim() {
            return Err(Error::DimensionMismatch {
                context: "action",
                expected: action_dim(),
                actual: values.len(),
            });
        }
        Ok(Self::clamped(values))
    }

    pub(crate) fn clamped(mut values: Vec<f64>) -> Self {
        for v in values.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        }
        Self(values)
    }

    pub fn hold() -> Self {
        let mut v = vec![0.0; action_dim()];
        v[Self::TRANSMIT] = -1.0;
        Self(v)
    }

    /// Send everything at full power to `slot`.
    pub fn send_all(slot: usize) -> Self {
        let mut v = vec![-1.0; action_dim()];
        v[Self::TRANSMIT] = 1.0;
        v[Self::LOGITS + slot] = 1.0;
        v[Self::POWER] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Decode against `available` occupied neighbor slots. The preferred slot
    /// is the arg-max logit among occupied slots, ties to the lower slot.
    pub fn decode(&self, available: usize) -> DecodedAction {
        let mut slot = None;
        let mut best = f64::NEG_INFINITY;
        for s in 0..available.min(NEIGHBOR_SLOTS) {
            let logit = self.0[Self::LOGITS + s];
            if logit > best {
                best = logit;
                slot = Some(s);
            }
        }
        DecodedAction {
            transmit_fraction: (self.0[Self::TRANSMIT] + 1.0) / 2.0,
            slot,
            power: (self.0[Self::POWER] + 1.0) / 2.0,
        }
    }
}
