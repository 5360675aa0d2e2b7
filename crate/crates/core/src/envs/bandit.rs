use std::f64::consts::PI;

use super::{ActionBox, Env, EnvError, EnvSpec, Episode, StepResult};

pub const MIXTURE_MEANS: [[f64; 2]; 4] = [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]];
pub const MIXTURE_STD: f64 = 0.1;

fn component_logs(a: &[f64]) -> [f64; 4] {
    let var = MIXTURE_STD * MIXTURE_STD;
    let norm = (0.25f64).ln() - (2.0 * PI * var).ln();
    let mut out = [0.0; 4];
    for (k, m) in MIXTURE_MEANS.iter().enumerate() {
        let d2 = (a[0] - m[0]).powi(2) + (a[1] - m[1]).powi(2);
        out[k] = norm - d2 / (2.0 * var);
    }
    out
}

/// Log-density of the equal-weight four-component mixture.
pub fn mixture_log_density(a: &[f64]) -> f64 {
    let l = component_logs(a);
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + l.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mixture_log_density_grad(a: &[f64]) -> [f64; 2] {
    let l = component_logs(a);
    let total = mixture_log_density(a);
    let var = MIXTURE_STD * MIXTURE_STD;
    let mut g = [0.0; 2];
    for (k, m) in MIXTURE_MEANS.iter().enumerate() {
        let w = (l[k] - total).exp();
        g[0] += w * (m[0] - a[0]) / var;
        g[1] += w * (m[1] - a[1]) / var;
    }
    g
}

/// One-step bandit whose reward is the mixture log-density of the action.
#[derive(Clone, Debug)]
pub struct GaussianMixtureBandit {
    spec: EnvSpec,
    ep: Episode,
}

impl GaussianMixtureBandit {
    pub fn new(seed: u64) -> Self {
        let spec = EnvSpec {
            name: "gaussian_mixture_bandit",
            state_dim: 1,
            action_dim: 2,
            action_box: ActionBox::symmetric(2, 1.0),
            max_episode_steps: 1,
        };
        GaussianMixtureBandit { spec, ep: Episode::new(seed) }
    }
}

impl Env for GaussianMixtureBandit {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        self.ep.begin(seed);
        vec![1.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.ep.over {
            return Err(EnvError::StepAfterDone);
        }
        if !self.spec.action_box.contains(action) {
            return Err(EnvError::OutOfBox(action.to_vec()));
        }
        self.ep.steps += 1;
        self.ep.over = true;
        Ok(StepResult { next_state: vec![1.0], reward: mixture_log_density(action), done: true, truncated: false })
    }

    fn steps(&self) -> usize {
        self.ep.steps
    }

    fn reward_bounds(&self) -> (f64, f64) {
        // Peak just above log(1/4 / (2π·0.01)); the far corners sit near −23.6.
        (-24.0, 1.3811)
    }

    fn snapshot(&self) -> Vec<u8> {
        self.ep.encode(&[])
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<(), EnvError> {
        self.ep.decode(bytes, &mut [])
    }
}
