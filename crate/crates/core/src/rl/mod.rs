//! Runtime-stage online placer: state/action encoding, reward, replay
//! memory, actor-critic networks, and the training loop.

pub(crate) mod codec;
mod net;
mod replay;
mod reward;
pub(crate) mod train;

pub use codec::{ActionMatrix, StateCodec, StateVector, SystemSnapshot};
pub use net::{
    load_checkpoint, save_checkpoint, soft_update, ActorCritic, Layer, Mlp, MlpGrads, Trace,
};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{compute_reward, reward_branch, RewardBranch, RewardReference, REWARD_C};
pub use train::{
    act_with_noise, critic_targets, train, train_from, update_networks, ActionLayout, EnvStep,
    PlacementEnv,
    RewardGranularity, TrainConfig, TrainLogRow, TrainOutput, UpdateStats,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("scenario has {have} datasets but the codec is padded for {slots}")]
    TooManyDatasets { have: usize, slots: usize },
    #[error("replay buffer holds {len} transitions, need at least {batch}")]
    BufferTooSmall { len: usize, batch: usize },
    #[error("non-finite value in {0}; aborting the run")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("environment: {0}")]
    Env(String),
    #[error(transparent)]
    Optim(#[from] crate::optimize::OptimError),
}
