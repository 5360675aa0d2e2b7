//! Tanh-squashed diagonal Gaussian actor used as the unimodal comparison arm.

use std::f64::consts::{LN_2, PI};

use crate::critic::{twin_q, QAgg};
use crate::diffcore::{Eval, Ops, Tensor};
use crate::envs::ActionBox;
use crate::nets::{kaiming_uniform, CriticConfig, CriticParams, NetError, ParamSet};
use crate::rng::Rng;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub log_sigma_min: f64,
    pub log_sigma_max: f64,
}

impl GaussianConfig {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        GaussianConfig { state_dim, action_dim, hidden: 256, depth: 3, log_sigma_min: -10.0, log_sigma_max: 2.0 }
    }
}

pub fn init_gaussian(cfg: &GaussianConfig, rng: &mut Rng) -> ParamSet {
    let mut p = ParamSet::new();
    let mut fan_in = cfg.state_dim;
    for i in 0..cfg.depth.max(1) {
        p.push(format!("l{i}.w"), kaiming_uniform(rng, fan_in, cfg.hidden));
        p.push(format!("l{i}.b"), Tensor::zeros(1, cfg.hidden));
        fan_in = cfg.hidden;
    }
    p.push("mean.w", Tensor::zeros(fan_in, cfg.action_dim));
    p.push("mean.b", Tensor::zeros(1, cfg.action_dim));
    p.push("log_sigma.w", Tensor::zeros(fan_in, cfg.action_dim));
    p.push("log_sigma.b", Tensor::zeros(1, cfg.action_dim));
    p
}

/// Squashed sample and its exact log-density, `(rows × d, rows × 1)`.
pub fn gaussian_sample<O: Ops>(
    ops: &mut O,
    cfg: &GaussianConfig,
    params: &[O::V],
    action_box: &ActionBox,
    state: &O::V,
    eps: &Tensor,
) -> Result<(O::V, O::V), NetError> {
    let mut h = state.clone();
    let mut i = 0;
    for _ in 0..cfg.depth.max(1) {
        let z = ops.matmul(&h, &params[i])?;
        let z = ops.add(&z, &params[i + 1])?;
        h = ops.relu(&z)?;
        i += 2;
    }
    let mean = ops.matmul(&h, &params[i])?;
    let mean = ops.add(&mean, &params[i + 1])?;
    let raw = ops.matmul(&h, &params[i + 2])?;
    let raw = ops.add(&raw, &params[i + 3])?;
    let log_sigma = ops.clamp(&raw, cfg.log_sigma_min, cfg.log_sigma_max)?;
    let sigma = ops.exp(&log_sigma)?;
    let eps_v = ops.constant(eps.clone());
    let noise = ops.mul(&sigma, &eps_v)?;
    let z = ops.add(&mean, &noise)?;
    let y = ops.tanh(&z)?;
    let half = ops.constant(action_box.half_width());
    let center = ops.constant(action_box.center());
    let scaled = ops.mul(&y, &half)?;
    let action = ops.add(&scaled, &center)?;

    // log N(z) − log|d action/dz| with log(1 − tanh²z) = 2(ln 2 − z − softplus(−2z)).
    let base = ops.constant(eps.map(|e| -0.5 * e * e - 0.5 * (2.0 * PI).ln()));
    let per_dim = ops.sub(&base, &log_sigma)?;
    let m2z = ops.scale(&z, -2.0)?;
    let sp = ops.softplus(&m2z)?;
    let zsp = ops.add(&z, &sp)?;
    let log_det = ops.affine(&zsp, -2.0, 2.0 * LN_2)?;
    let per_dim = ops.sub(&per_dim, &log_det)?;
    let log_half: f64 = action_box.half_width().data().iter().map(|h| h.ln()).sum();
    let lp = ops.sum_cols(&per_dim)?;
    let lp = ops.affine(&lp, 1.0, -log_half)?;
    Ok((action, lp))
}

/// SAC actor loss `mean(α log π(a|s) − Q(s, a))`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_actor_loss<O: Ops>(
    ops: &mut O,
    cfg: &GaussianConfig,
    params: &[O::V],
    action_box: &ActionBox,
    critic_cfg: &CriticConfig,
    critic: &CriticParams,
    q_agg: QAgg,
    alpha: f64,
    states: &Tensor,
    eps: &Tensor,
) -> Result<O::V> {
    let s = ops.constant(states.clone());
    let (a, lp) = gaussian_sample(ops, cfg, params, action_box, &s, eps)?;
    let q1 = critic.q1.lift(ops);
    let q2 = critic.q2.lift(ops);
    let q = twin_q(ops, critic_cfg, &q1, &q2, &s, &a, q_agg)?;
    let obj = if alpha != 0.0 {
        let w = ops.scale(&lp, alpha)?;
        ops.sub(&w, &q)?
    } else {
        ops.neg(&q)?
    };
    Ok(ops.mean(&obj)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianActor {
    pub cfg: GaussianConfig,
    pub params: ParamSet,
    pub action_box: ActionBox,
}

impl GaussianActor {
    pub fn new(cfg: GaussianConfig, action_box: ActionBox, rng: &mut Rng) -> Self {
        let params = init_gaussian(&cfg, rng);
        GaussianActor { cfg, params, action_box }
    }

    /// Actions and log-densities for standard normal draws `eps`.
    pub fn sample(&self, state: &Tensor, eps: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok(gaussian_sample(&mut Eval, &self.cfg, self.params.tensors(), &self.action_box, state, eps)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_tensor, seeded, uniform_tensor};

    #[test]
    fn log_density_matches_change_of_variables() {
        let cfg = GaussianConfig { hidden: 8, depth: 2, ..GaussianConfig::new(2, 2) };
        let bx = ActionBox::new(vec![-1.0, 0.0], vec![1.0, 4.0]).unwrap();
        let mut rng = seeded(1);
        let mut g = GaussianActor::new(cfg, bx, &mut rng);
        for t in g.params.tensors_mut() {
            t.add_assign(&uniform_tensor(&mut rng, t.rows(), t.cols(), -0.3, 0.3));
        }
        let s = normal_tensor(&mut rng, 5, 2);
        let eps = normal_tensor(&mut rng, 5, 2);
        let (a, lp) = g.sample(&s, &eps).unwrap();
        assert!(lp.is_finite());
        // Recompute from the squashed action directly.
        let mut h = s.clone();
        let p = g.params.tensors();
        for l in 0..2 {
            h = h.matmul(&p[2 * l]).unwrap().broadcast_with(&p[2 * l + 1], "b", |x, y| x + y).unwrap().map(|v| v.max(0.0));
        }
        let mean = h.matmul(&p[4]).unwrap().broadcast_with(&p[5], "b", |x, y| x + y).unwrap();
        let ls = h.matmul(&p[6]).unwrap().broadcast_with(&p[7], "b", |x, y| x + y).unwrap().map(|v| v.clamp(-10.0, 2.0));
        let half = [1.0, 2.0];
        let center = [0.0, 2.0];
        for r in 0..5 {
            let mut want = 0.0;
            for c in 0..2 {
                let y = (a.get(r, c) - center[c]) / half[c];
                let z = y.atanh();
                let sigma = ls.get(r, c).exp();
                let u = (z - mean.get(r, c)) / sigma;
                want += -0.5 * u * u - sigma.ln() - 0.5 * (2.0 * PI).ln() - (half[c] * (1.0 - y * y)).ln();
            }
            assert!((lp.get(r, 0) - want).abs() < 1e-8, "{} vs {}", lp.get(r, 0), want);
        }
    }
}
