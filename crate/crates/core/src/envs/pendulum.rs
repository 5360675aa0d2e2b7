use std::f64::consts::PI;

use super::{ActionBox, Env, EnvError, EnvSpec, Episode, StepResult};
use crate::rng::uniform;

const DT: f64 = 0.05;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const EPISODE_STEPS: usize = 200;

/// Torque-limited point-mass pendulum; `θ = 0` is upright.
#[derive(Clone, Debug)]
pub struct PendulumSwingUp {
    spec: EnvSpec,
    ep: Episode,
    // [θ, θ̇]
    phys: [f64; 2],
}

fn wrap(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl PendulumSwingUp {
    pub fn new(seed: u64) -> Self {
        let spec = EnvSpec {
            name: "pendulum_swing_up",
            state_dim: 3,
            action_dim: 1,
            action_box: ActionBox::symmetric(1, MAX_TORQUE),
            max_episode_steps: EPISODE_STEPS,
        };
        PendulumSwingUp { spec, ep: Episode::new(seed), phys: [0.0; 2] }
    }

    /// Place the pendulum at `(θ, θ̇)` and start a fresh episode.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.ep.begin(None);
        self.phys = [theta, theta_dot];
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.phys[0].cos(), self.phys[0].sin(), self.phys[1]]
    }

    pub fn reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        let th = wrap(theta);
        -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
    }
}

impl Env for PendulumSwingUp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        self.ep.begin(seed);
        let theta = uniform(&mut self.ep.rng, -PI, PI);
        let theta_dot = uniform(&mut self.ep.rng, -1.0, 1.0);
        self.phys = [theta, theta_dot];
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.ep.over {
            return Err(EnvError::StepAfterDone);
        }
        if !self.spec.action_box.contains(action) {
            return Err(EnvError::OutOfBox(action.to_vec()));
        }
        let [th, thd] = self.phys;
        let u = action[0];
        let reward = Self::reward(th, thd, u);
        let acc = G / LENGTH * th.sin() + u / (MASS * LENGTH * LENGTH);
        let thd = (thd + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.phys = [th + thd * DT, thd];
        self.ep.steps += 1;
        let truncated = self.ep.steps >= EPISODE_STEPS;
        self.ep.over = truncated;
        Ok(StepResult { next_state: self.observe(), reward, done: false, truncated })
    }

    fn steps(&self) -> usize {
        self.ep.steps
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (-(PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * MAX_TORQUE * MAX_TORQUE), 0.0)
    }

    fn snapshot(&self) -> Vec<u8> {
        self.ep.encode(&self.phys)
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<(), EnvError> {
        self.ep.decode(bytes, &mut self.phys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_at_rest_has_zero_reward_and_stays() {
        let mut env = PendulumSwingUp::new(0);
        env.set_state(0.0, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap(-0.25) + 0.25).abs() < 1e-15);
    }
}
