//! The one-step stochastic actor, its losses and value-guided selection, plus
//! a squashed-Gaussian baseline.

mod gaussian;
mod losses;
mod meanflow;
mod objective;
mod selection;
mod smfp;

pub use gaussian::{gaussian_actor_loss, gaussian_sample, init_gaussian, GaussianActor, GaussianConfig};
pub use losses::{advantage_weights, entropy_floor_loss, entropy_surrogate, exponential_weights, huber_loss, value_baseline};
pub use meanflow::{compute_g_tgt, g_tgt_parts, md_loss, sample_time_pairs, ActorField, MdBatch, StochasticField, TargetParts};
pub use objective::{actor_loss, ActorDiagnostics, ActorLossConfig, ActorLossInputs};
pub use selection::{argmax_lowest, best_of_k, target_k, Selected};
pub use smfp::{conditional_velocity, interpolate, interpolate_rows, one_step_sample, NoisePair, SmfpActor};
