use crate::critic::CriticEnsemble;
use crate::diffcore::Tensor;
use crate::envs::{make_env, Env, StepResult};
use crate::policy::{best_of_k, GaussianActor, SmfpActor};
use crate::rng::{normal_tensor, stream, Rng};
use crate::{Error, Result};

/// Trained actor of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Agent {
    Smfp(SmfpActor),
    Gaussian(GaussianActor),
}

/// Maps a batch of states to in-box actions.
pub trait Behaviour {
    fn act(&self, states: &Tensor, rng: &mut Rng) -> Result<Tensor>;
}

/// Best-of-`k` SMFP sampling scored by the online critic, or a plain
/// squashed-Gaussian draw.
pub struct Policy<'a> {
    pub agent: &'a Agent,
    pub critic: &'a CriticEnsemble,
    pub k: usize,
}

impl Behaviour for Policy<'_> {
    fn act(&self, states: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        match self.agent {
            Agent::Smfp(actor) => Ok(best_of_k(actor, states, self.k, rng, |s, a| self.critic.online_q(s, a))?.actions),
            Agent::Gaussian(g) => {
                let eps = normal_tensor(rng, states.rows(), g.cfg.action_dim);
                Ok(g.sample(states, &eps)?.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalResult {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        EvalResult { mean, std: var.sqrt(), returns }
    }

    pub fn standard_error(&self) -> f64 {
        self.std / (self.returns.len() as f64).sqrt()
    }
}

/// `n` plain one-step (SMFP) or squashed-Gaussian actions at one state,
/// without best-of-K selection.
pub fn policy_samples(agent: &Agent, state: &[f64], n: usize, seed: u64) -> Result<Tensor> {
    let mut rng = stream(seed, 3);
    let states = Tensor::row(state).repeat_rows(n);
    match agent {
        Agent::Smfp(actor) => {
            let noise = crate::policy::NoisePair::draw(&mut rng, n, actor.action_dim());
            actor.sample_one_step(&states, &noise)
        }
        Agent::Gaussian(g) => {
            let eps = normal_tensor(&mut rng, n, g.cfg.action_dim);
            Ok(g.sample(&states, &eps)?.0)
        }
    }
}

/// Undiscounted returns of `episodes` rollouts on a fresh environment.
/// `on_step(episode, result)` sees every transition.
pub fn rollouts(
    policy: &dyn Behaviour,
    env: &mut dyn Env,
    episodes: usize,
    seed: u64,
    mut on_step: impl FnMut(usize, &StepResult),
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Invalid("evaluation needs at least one episode".into()));
    }
    let mut rng = stream(seed, 2);
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut s = env.reset(if ep == 0 { Some(seed) } else { None });
        let mut ret = 0.0;
        loop {
            let a = policy.act(&Tensor::row(&s), &mut rng)?;
            let r = env.step(a.row_slice(0))?;
            on_step(ep, &r);
            ret += r.reward;
            if r.done || r.truncated {
                break;
            }
            s = r.next_state;
        }
        out.push(ret);
    }
    Ok(out)
}

/// Seeded evaluation on a new instance of the named environment.
pub fn evaluate(policy: &dyn Behaviour, env_name: &str, episodes: usize, seed: u64) -> Result<EvalResult> {
    let mut env = make_env(env_name, seed)?;
    let returns = rollouts(policy, env.as_mut(), episodes, seed, |_, _| {})?;
    Ok(EvalResult::from_returns(returns))
}

/// Episodes whose trajectory came within `radius` of each goal, with the
/// closer goal credited when an episode touches both.
pub fn goal_reach_counts(policy: &dyn Behaviour, episodes: usize, seed: u64, radius: f64) -> Result<[usize; 2]> {
    use crate::envs::TwoGoalPointMass;
    let mut env = make_env("two_goal_point_mass", seed)?;
    let mut best = vec![[f64::INFINITY; 2]; episodes];
    rollouts(policy, env.as_mut(), episodes, seed, |ep, r| {
        let d = TwoGoalPointMass::goal_distances(&r.next_state);
        best[ep][0] = best[ep][0].min(d[0]);
        best[ep][1] = best[ep][1].min(d[1]);
    })?;
    let mut counts = [0; 2];
    for d in best {
        if d[0].min(d[1]) < radius {
            counts[if d[0] <= d[1] { 0 } else { 1 }] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::mixture_log_density;

    struct Fixed(Vec<f64>);

    impl Behaviour for Fixed {
        fn act(&self, states: &Tensor, _rng: &mut Rng) -> Result<Tensor> {
            Ok(Tensor::from_rows(&vec![self.0.clone(); states.rows()]).unwrap())
        }
    }

    #[test]
    fn fixed_bandit_action_returns_its_density() {
        let r = evaluate(&Fixed(vec![0.5, 0.5]), "gaussian_mixture_bandit", 3, 0).unwrap();
        assert!((r.mean - mixture_log_density(&[0.5, 0.5])).abs() < 1e-6);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn single_episode_has_zero_std_and_seeds_repeat() {
        let r = evaluate(&Fixed(vec![0.3]), "pendulum_swing_up", 1, 5).unwrap();
        assert_eq!(r.std, 0.0);
        assert_eq!(r, evaluate(&Fixed(vec![0.3]), "pendulum_swing_up", 1, 5).unwrap());
        assert!(evaluate(&Fixed(vec![0.3]), "pendulum_swing_up", 0, 5).is_err());
    }

    #[test]
    fn pushing_right_reaches_one_goal() {
        let c = goal_reach_counts(&Fixed(vec![1.0, 0.0]), 4, 1, 0.2).unwrap();
        assert_eq!(c.iter().sum::<usize>(), 4);
        assert!(c[0] == 0 || c[1] == 0);
    }
}
