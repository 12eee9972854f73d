//! Discrete-time model of a mobile tactical mesh.
//!
//! Nodes random-walk inside a square area, generate packets bound for the
//! nearest gateway and forward them hop by hop. Link delivery probability
//! falls linearly with distance and scales with the sender's transmit power;
//! jamming events subtract a fixed loss boost from every link touching their
//! disc. All randomness comes from the generator owned by the world, so a
//! trajectory is a pure function of the config and the actions applied.

mod config;
mod reward;
mod types;
mod world;

pub use config::{EnvConfig, JamEvent};
pub use reward::{compute_reward, RewardWeights};
pub use types::{
    ActionVector, DecodedAction, LinkState, NodeState, Observation, Packet, PacketLedger,
    StepOutcome,
};
pub use world::WorldState;

/// Neighbor slots exposed in each observation and action.
pub const NEIGHBOR_SLOTS: usize = 5;

/// Features per neighbor slot: link quality, queue fill, gateway proximity.
pub const SLOT_FEATURES: usize = 3;

pub const fn observation_dim() -> usize {
    2 + SLOT_FEATURES * NEIGHBOR_SLOTS + 2
}

pub const fn action_dim() -> usize {
    1 + NEIGHBOR_SLOTS + 1
}
