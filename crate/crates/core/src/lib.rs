//! EdgeAgentX: federated multi-agent learning for tactical mesh networks.
//!
//! The crate is split along the three layers of the framework plus the
//! plumbing needed to run experiments:
//!
//! * [`sim_env`] is a seeded discrete-time model of a mobile multi-hop mesh
//!   with jamming, producing local observations and the shared reward.
//! * [`neural`] holds the dense networks, their hand-derived gradients, the
//!   adaptive-moment optimizer and the flat parameter / checkpoint codecs.
//! * [`marl`] implements MADDPG (centralized critics, decentralized actors)
//!   and the independent / centralized baselines.
//! * [`federation`] runs FedAvg rounds with two-tier aggregation.
//! * [`defense`] models poisoning attackers and filters anomalous updates.
//! * [`harness`] parses experiment configs, drives training for every
//!   variant and writes the metrics CSVs.

pub mod defense;
pub mod error;
pub mod federation;
pub mod harness;
pub mod marl;
pub mod neural;
pub mod rng;
pub mod sim_env;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, MetricsRecord, RunSummary, Variant};
pub use neural::{FlatParams, Mlp};
pub use sim_env::{ActionVector, EnvConfig, Observation, WorldState};
