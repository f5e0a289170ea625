//! Placement of data-sharing scientific workflow datasets onto multi-region
//! edge-cloud topologies: a seedable simulator, a discrete PSO+DE build-time
//! optimizer, an actor-critic runtime placer, baselines, and an experiment
//! harness.

pub mod experiment;
pub mod model;
pub mod optimize;
pub mod rl;
pub mod scenario;
pub mod sim;

pub use model::{Scenario, TransferTime};
