//! Slotted two-stage execution: build-time placement of initial datasets,
//! then runtime waves of ready tasks generating and consuming datasets.

mod engine;
mod env;
mod placer;
mod state;
#[cfg(test)]
mod tests;

pub use engine::{place_build_time, run_strategy, RunSummary, SimConfig, Strategy};
pub use env::SlotPlacementEnv;
pub use placer::{
    placement_quality, BirthSitePlacer, RlPolicyPlacer, RuntimePlacer, SlotOptimizerPlacer,
};
pub use state::{
    advance_slot, begin_slot, evict_consumed, finish_slot, PendingDataset, SimulationState,
    SlotPrep,
};

use thiserror::Error;

use crate::model::{ModelError, Violation};
use crate::optimize::OptimError;
use crate::rl::RlError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario failed validation: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("invariant violated at slot {slot}: {what}")]
    Invariant { slot: u32, what: String },
    #[error("simulation stalled at slot {slot}: tasks remain but none can become ready")]
    Stalled { slot: u32 },
    #[error("slot limit {0} exceeded")]
    SlotLimit(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Rl(#[from] RlError),
}
