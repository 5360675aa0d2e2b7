//! One-step stochastic generative policies for continuous control, trained
//! with an entropy floor and advantage-weighted mirror-descent regression.

pub mod critic;
pub mod diffcore;
pub mod envs;
pub mod nets;
pub mod oracles;
pub mod policy;
pub mod rng;
pub mod trainer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diff(#[from] diffcore::DiffError),
    #[error(transparent)]
    Net(#[from] nets::NetError),
    #[error(transparent)]
    Env(#[from] envs::EnvError),
    #[error(transparent)]
    Config(#[from] trainer::ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
