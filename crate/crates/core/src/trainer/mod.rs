//! Interaction loop, updates, evaluation, metrics and checkpoints.

mod buffer;
mod config;
mod evaluate;
mod metrics;
mod run;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use config::{lambda_for_task, ActorKind, ConfigError, TrainConfig, UpdateOrder, DEFAULT_LAMBDA, LAMBDA_TABLE};
pub use evaluate::{evaluate, goal_reach_counts, policy_samples, rollouts, Agent, Behaviour, EvalResult, Policy};
pub use metrics::{MetricsRow, METRICS_HEADER};
pub use run::{draw_proposals, Proposals, Trainer};
