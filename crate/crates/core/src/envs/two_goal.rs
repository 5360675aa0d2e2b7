use super::{ActionBox, Env, EnvError, EnvSpec, Episode, StepResult};
use crate::rng::normal;

pub const GOALS: [[f64; 2]; 2] = [[1.0, 0.0], [-1.0, 0.0]];
/// Distance at which an episode terminates.
const TERMINAL_RADIUS: f64 = 0.1;
/// Distance at which a goal counts as visited when tallying outcomes.
pub const GOAL_REACH_RADIUS: f64 = 0.2;
const START_STD: f64 = 0.05;
const EPISODE_STEPS: usize = 50;

/// Planar point mass with two symmetric goals.
#[derive(Clone, Debug)]
pub struct TwoGoalPointMass {
    spec: EnvSpec,
    ep: Episode,
    pos: [f64; 2],
}

impl TwoGoalPointMass {
    pub fn new(seed: u64) -> Self {
        let spec = EnvSpec {
            name: "two_goal_point_mass",
            state_dim: 2,
            action_dim: 2,
            action_box: ActionBox::symmetric(2, 1.0),
            max_episode_steps: EPISODE_STEPS,
        };
        TwoGoalPointMass { spec, ep: Episode::new(seed), pos: [0.0; 2] }
    }

    pub fn goal_distances(pos: &[f64]) -> [f64; 2] {
        let d = |g: &[f64; 2]| ((pos[0] - g[0]).powi(2) + (pos[1] - g[1]).powi(2)).sqrt();
        [d(&GOALS[0]), d(&GOALS[1])]
    }

    pub fn reward(next: &[f64], action: &[f64]) -> f64 {
        let d = Self::goal_distances(next);
        let bonus = d.iter().map(|d| (-8.0 * d * d).exp()).fold(f64::NEG_INFINITY, f64::max);
        bonus - 0.01 * (action[0] * action[0] + action[1] * action[1])
    }
}

impl Env for TwoGoalPointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        self.ep.begin(seed);
        self.pos = [START_STD * normal(&mut self.ep.rng), START_STD * normal(&mut self.ep.rng)];
        self.pos.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.ep.over {
            return Err(EnvError::StepAfterDone);
        }
        if !self.spec.action_box.contains(action) {
            return Err(EnvError::OutOfBox(action.to_vec()));
        }
        self.pos = [self.pos[0] + 0.1 * action[0], self.pos[1] + 0.1 * action[1]];
        self.ep.steps += 1;
        let reward = Self::reward(&self.pos, action);
        let done = Self::goal_distances(&self.pos).iter().any(|&d| d < TERMINAL_RADIUS);
        let truncated = !done && self.ep.steps >= EPISODE_STEPS;
        self.ep.over = done || truncated;
        Ok(StepResult { next_state: self.pos.to_vec(), reward, done, truncated })
    }

    fn steps(&self) -> usize {
        self.ep.steps
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (-0.02, 1.0)
    }

    fn snapshot(&self) -> Vec<u8> {
        self.ep.encode(&self.pos)
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<(), EnvError> {
        self.ep.decode(bytes, &mut self.pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_action_at_origin() {
        // Both goals sit at distance one; the reward takes the larger of the two terms.
        let r = TwoGoalPointMass::reward(&[0.0, 0.0], &[0.0, 0.0]);
        assert!((r - (-8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn terminates_near_a_goal_and_truncates_at_limit() {
        let mut env = TwoGoalPointMass::new(0);
        env.reset(Some(0));
        env.pos = [0.85, 0.0];
        let r = env.step(&[1.0, 0.0]).unwrap();
        assert!(r.done && !r.truncated);

        env.reset(Some(0));
        let mut last = None;
        for _ in 0..EPISODE_STEPS {
            last = Some(env.step(&[0.0, 1.0]).unwrap());
        }
        let last = last.unwrap();
        assert!(last.truncated && !last.done);
    }
}
