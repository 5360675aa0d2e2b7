//! Desk-scale control tasks with analytic dynamics.

mod bandit;
mod pendulum;
mod two_goal;

pub use bandit::{mixture_log_density, mixture_log_density_grad, GaussianMixtureBandit, MIXTURE_MEANS, MIXTURE_STD};
pub use pendulum::PendulumSwingUp;
pub use two_goal::{TwoGoalPointMass, GOALS, GOAL_REACH_RADIUS};

use thiserror::Error;

use crate::diffcore::Tensor;
use crate::rng::{seeded, stream, uniform, Rng, RngState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("action {0:?} outside the action box")]
    OutOfBox(Vec<f64>),
    #[error("step called after the episode ended; call reset first")]
    StepAfterDone,
    #[error("unknown environment {0:?}")]
    Unknown(String),
    #[error("invalid action box: {0}")]
    InvalidBox(String),
    #[error("corrupt environment snapshot")]
    CorruptSnapshot,
}

/// Per-dimension action bounds with `low < high`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionBox {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ActionBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, EnvError> {
        if low.len() != high.len() || low.is_empty() {
            return Err(EnvError::InvalidBox("bounds must be non-empty and equally long".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(EnvError::InvalidBox("low must be below high".into()));
        }
        Ok(ActionBox { low, high })
    }

    pub fn symmetric(dim: usize, bound: f64) -> Self {
        ActionBox::new(vec![-bound; dim], vec![bound; dim]).expect("positive bound")
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().zip(self.low.iter().zip(&self.high)).all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Clamp every row of `a` into the box.
    pub fn clamp(&self, a: &Tensor) -> Tensor {
        let d = self.dim();
        let mut out = a.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let c = i % d;
            *v = v.clamp(self.low[c], self.high[c]);
        }
        out
    }

    pub fn center(&self) -> Tensor {
        Tensor::row(&self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect::<Vec<_>>())
    }

    pub fn half_width(&self) -> Tensor {
        Tensor::row(&self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (h - l)).collect::<Vec<_>>())
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(&l, &h)| uniform(rng, l, h)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_box: ActionBox,
    pub max_episode_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Terminal state reached.
    pub done: bool,
    /// Time limit hit without a terminal state.
    pub truncated: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;
    /// Start an episode; `Some(seed)` reseeds the initial-state generator.
    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
    /// Steps taken in the current episode.
    fn steps(&self) -> usize;
    /// Inclusive bounds on any single reward.
    fn reward_bounds(&self) -> (f64, f64);
    fn snapshot(&self) -> Vec<u8>;
    fn restore(&mut self, bytes: &[u8]) -> Result<(), EnvError>;
}

pub const ENV_NAMES: [&str; 3] = ["gaussian_mixture_bandit", "two_goal_point_mass", "pendulum_swing_up"];

pub fn make_env(name: &str, seed: u64) -> Result<Box<dyn Env>, EnvError> {
    match name {
        "gaussian_mixture_bandit" => Ok(Box::new(GaussianMixtureBandit::new(seed))),
        "two_goal_point_mass" => Ok(Box::new(TwoGoalPointMass::new(seed))),
        "pendulum_swing_up" => Ok(Box::new(PendulumSwingUp::new(seed))),
        other => Err(EnvError::Unknown(other.to_string())),
    }
}

/// Mean undiscounted return of uniformly random actions.
pub fn random_policy_returns(env: &mut dyn Env, episodes: usize, seed: u64) -> Vec<f64> {
    let mut act_rng = stream(seed, 1);
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        env.reset(if ep == 0 { Some(seed) } else { None });
        let mut ret = 0.0;
        loop {
            let a = env.spec().action_box.sample(&mut act_rng);
            let r = env.step(&a).expect("in-box action");
            ret += r.reward;
            if r.done || r.truncated {
                break;
            }
        }
        out.push(ret);
    }
    out
}

pub fn random_policy_return(env: &mut dyn Env, episodes: usize, seed: u64) -> f64 {
    assert!(episodes >= 1, "need at least one episode");
    let r = random_policy_returns(env, episodes, seed);
    r.iter().sum::<f64>() / r.len() as f64
}

/// Shared episode bookkeeping and snapshot encoding.
#[derive(Clone, Debug)]
struct Episode {
    rng: Rng,
    steps: usize,
    over: bool,
}

impl Episode {
    fn new(seed: u64) -> Self {
        Episode { rng: seeded(seed), steps: 0, over: true }
    }

    fn begin(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.rng = seeded(s);
        }
        self.steps = 0;
        self.over = false;
    }

    fn encode(&self, state: &[f64]) -> Vec<u8> {
        let mut b = RngState::capture(&self.rng).to_bytes();
        b.extend_from_slice(&(self.steps as u64).to_le_bytes());
        b.push(self.over as u8);
        for v in state {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    fn decode(&mut self, bytes: &[u8], state: &mut [f64]) -> Result<(), EnvError> {
        let n = RngState::BYTES;
        if bytes.len() != n + 9 + 8 * state.len() {
            return Err(EnvError::CorruptSnapshot);
        }
        self.rng = RngState::from_bytes(&bytes[..n]).ok_or(EnvError::CorruptSnapshot)?.restore();
        self.steps = u64::from_le_bytes(bytes[n..n + 8].try_into().unwrap()) as usize;
        self.over = match bytes[n + 8] {
            0 => false,
            1 => true,
            _ => return Err(EnvError::CorruptSnapshot),
        };
        for (i, v) in state.iter_mut().enumerate() {
            let at = n + 9 + 8 * i;
            *v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_validation_and_clamp() {
        assert!(ActionBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(ActionBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = ActionBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let c = b.clamp(&Tensor::from_vec(2, 2, vec![-3.0, 3.0, 0.5, -1.0]).unwrap());
        assert_eq!(c.data(), &[-1.0, 2.0, 0.5, 0.0]);
        assert_eq!(b.center().data(), &[0.0, 1.0]);
        assert!(b.contains(&[1.0, 2.0]) && !b.contains(&[1.1, 0.0]));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(make_env("cartpole", 0), Err(EnvError::Unknown(_))));
    }

    #[test]
    fn resets_are_seeded_and_counters_zeroed() {
        for name in ENV_NAMES {
            let mut env = make_env(name, 0).unwrap();
            let a = env.reset(Some(42));
            let b = env.reset(Some(42));
            assert_eq!(a, b, "{name}");
            assert_eq!(env.steps(), 0);
        }
        for name in ["two_goal_point_mass", "pendulum_swing_up"] {
            let mut env = make_env(name, 0).unwrap();
            let differ = (0..100u64).filter(|&i| env.reset(Some(2 * i)) != env.reset(Some(2 * i + 1))).count();
            assert!(differ >= 99, "{name}: {differ}");
        }
    }

    #[test]
    fn rewards_stay_in_declared_bounds() {
        for name in ENV_NAMES {
            let mut env = make_env(name, 1).unwrap();
            let (lo, hi) = env.reward_bounds();
            let mut rng = seeded(2);
            env.reset(Some(3));
            for _ in 0..100_000 {
                let a = env.spec().action_box.sample(&mut rng);
                let r = env.step(&a).unwrap();
                assert!(r.reward.is_finite() && lo <= r.reward && r.reward <= hi, "{name}: {}", r.reward);
                if r.done || r.truncated {
                    env.reset(None);
                }
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        for name in ENV_NAMES {
            let run = || {
                let mut env = make_env(name, 5).unwrap();
                let mut rng = seeded(6);
                let mut trace = env.reset(Some(7));
                for _ in 0..300 {
                    let a = env.spec().action_box.sample(&mut rng);
                    let r = env.step(&a).unwrap();
                    trace.extend(&r.next_state);
                    trace.push(r.reward);
                    if r.done || r.truncated {
                        trace.extend(env.reset(None));
                    }
                }
                trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            };
            assert_eq!(run(), run(), "{name}");
        }
    }

    #[test]
    fn step_contract_errors() {
        for name in ENV_NAMES {
            let mut env = make_env(name, 0).unwrap();
            assert_eq!(env.step(&vec![0.0; env.spec().action_dim]), Err(EnvError::StepAfterDone));
            env.reset(Some(0));
            let big = vec![10.0; env.spec().action_dim];
            assert!(matches!(env.step(&big), Err(EnvError::OutOfBox(_))));
        }
    }

    #[test]
    fn snapshot_restores_exact_continuation() {
        for name in ENV_NAMES {
            let mut env = make_env(name, 9).unwrap();
            let mut rng = seeded(10);
            env.reset(Some(11));
            for _ in 0..5 {
                let a = env.spec().action_box.sample(&mut rng);
                if env.step(&a).unwrap().done {
                    env.reset(None);
                }
            }
            let snap = env.snapshot();
            let mut other = make_env(name, 0).unwrap();
            other.restore(&snap).unwrap();
            for _ in 0..20 {
                let a = env.spec().action_box.sample(&mut rng);
                let (x, y) = (env.step(&a).unwrap(), other.step(&a).unwrap());
                assert_eq!(x, y);
                if x.done || x.truncated {
                    assert_eq!(env.reset(None), other.reset(None));
                }
            }
            assert!(other.restore(&snap[..3]).is_err());
        }
    }

    #[test]
    fn random_return_is_deterministic() {
        let mut env = make_env("two_goal_point_mass", 0).unwrap();
        let a = random_policy_return(env.as_mut(), 5, 3);
        let b = random_policy_return(env.as_mut(), 5, 3);
        assert_eq!(a, b);
    }
}
