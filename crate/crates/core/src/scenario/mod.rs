//! Experiment worlds: the multi-region default topology, synthetic
//! Montage-shaped workflows, and scenario file I/O.

mod gen;
mod io;

pub use gen::{build_topology, generate_scenario, with_staggered_arrivals, GenError};
pub use io::{
    load_scenario, save_scenario, scenario_from_json, scenario_to_json, ScenarioIoError,
};

use serde::{Deserialize, Serialize};

/// Knobs for the scenario generator. Fractions are probabilities over
/// initial datasets; the bandwidth multiplier scales only the edge-edge
/// entries of the default topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub regions: u32,
    pub edges_per_region: u32,
    pub edge_capacity_mb: u64,
    pub bandwidth_multiplier: f64,
    pub workflows: u32,
    pub tasks_per_workflow: (u32, u32),
    pub dataset_size_range_mb: (u64, u64),
    pub private_fraction: f64,
    pub shared_fraction: f64,
    pub sharing_enabled: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            regions: 2,
            edges_per_region: 3,
            edge_capacity_mb: 153_600, // 150 GB
            bandwidth_multiplier: 1.0,
            workflows: 4,
            tasks_per_workflow: (8, 14),
            dataset_size_range_mb: (512, 5120),
            private_fraction: 0.1,
            shared_fraction: 0.3,
            sharing_enabled: true,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
