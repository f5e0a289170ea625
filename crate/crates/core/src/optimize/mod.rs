//! Build-time placement search: discrete particle encoding over public
//! datasets and the DE-flavored discrete PSO plus its baselines.

mod engine;
mod particle;

pub use engine::{
    crossover, mutate, random_placement, run_baseline, run_de_dpso, run_discrete_search,
    run_metaheuristic, select_next, FitnessEvaluator, MetaheuristicKind, SelectionRule, SwarmState,
};
pub use particle::{decode, repair, repair_pending, Particle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DcId, ModelError};

/// Swarm parameters; defaults follow the experimental setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub n: usize,
    pub itermax: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub cr_p: f64,
    pub cr_g: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n: 100,
            itermax: 2000,
            f: 0.15,
            cr_p: 0.1,
            cr_g: 0.1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A reduced budget for per-slot reruns and desk-scale sweeps.
    pub fn desk_scale(seed: u64) -> Self {
        OptimizerConfig {
            n: 24,
            itermax: 80,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("particle dimension {got} does not match |D.pub| = {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("position {position} is outside the {num_dc} datacenters")]
    PositionOutOfRange { position: usize, num_dc: usize },
    #[error("private datasets alone exceed the capacity of {dc}; scenario rejected")]
    InfeasiblePrivateLoad { dc: DcId },
    #[error("region {region} has no cloud datacenter to repair onto")]
    NoCloudInRegion { region: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
