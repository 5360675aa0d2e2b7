//! Actor and critic networks, parameter containers and optimisation helpers.

mod actor;
mod adam;
mod checkpoint;
mod critic_net;
mod params;
mod schedule;

pub use actor::{actor_forward, init_actor, ActorConfig};
pub use adam::AdamState;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use critic_net::{critic_forward, init_critic, CriticConfig, CriticParams};
pub use params::{clip_grad_norm, global_norm, kaiming_uniform, polyak_update, ParamSet};
pub use schedule::LrSchedule;

use thiserror::Error;

use crate::diffcore::{DiffError, Ops};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("parameter layouts differ")]
    LayoutMismatch,
    #[error("non-finite gradient")]
    NonFiniteGrad,
    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("time pair has b > t")]
    TimeOrder,
    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for NetError {
    fn from(e: std::io::Error) -> Self {
        NetError::Io(e.to_string())
    }
}

/// `x·W + b` with `b` broadcast over rows.
pub(crate) fn linear<O: Ops>(ops: &mut O, x: &O::V, w: &O::V, b: &O::V) -> Result<O::V, DiffError> {
    let h = ops.matmul(x, w)?;
    ops.add(&h, b)
}
