use crate::diffcore::{Ops, Tensor, LAYER_NORM_EPS};
use crate::rng::Rng;

use super::params::kaiming_uniform;
use super::{linear, NetError, ParamSet};

#[derive(Clone, Debug, PartialEq)]
pub struct CriticConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub layer_norm: bool,
}

impl CriticConfig {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        CriticConfig { state_dim, action_dim, hidden: vec![512; 4], layer_norm: true }
    }
}

/// Twin Q networks with their Polyak-averaged targets.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParams {
    pub q1: ParamSet,
    pub q2: ParamSet,
}

/// One Q network: `[linear → layer norm → relu]*` then a scalar head.
pub fn init_critic(cfg: &CriticConfig, rng: &mut Rng) -> ParamSet {
    let mut p = ParamSet::new();
    let mut fan_in = cfg.state_dim + cfg.action_dim;
    for (i, &h) in cfg.hidden.iter().enumerate() {
        p.push(format!("l{i}.w"), kaiming_uniform(rng, fan_in, h));
        p.push(format!("l{i}.b"), Tensor::zeros(1, h));
        if cfg.layer_norm {
            p.push(format!("ln{i}.g"), Tensor::full(1, h, 1.0));
            p.push(format!("ln{i}.b"), Tensor::zeros(1, h));
        }
        fan_in = h;
    }
    p.push("out.w", kaiming_uniform(rng, fan_in, 1));
    p.push("out.b", Tensor::zeros(1, 1));
    p
}

impl CriticParams {
    pub fn init(cfg: &CriticConfig, rng: &mut Rng) -> Self {
        let q1 = init_critic(cfg, rng);
        let q2 = init_critic(cfg, rng);
        CriticParams { q1, q2 }
    }
}

/// Q values as a `batch × 1` column.
pub fn critic_forward<O: Ops>(
    ops: &mut O,
    cfg: &CriticConfig,
    params: &[O::V],
    state: &O::V,
    action: &O::V,
) -> Result<O::V, NetError> {
    let mut h = ops.concat_cols(&[state, action])?;
    let mut i = 0;
    for _ in &cfg.hidden {
        h = linear(ops, &h, &params[i], &params[i + 1])?;
        i += 2;
        if cfg.layer_norm {
            let n = ops.layer_norm(&h, LAYER_NORM_EPS)?;
            let g = ops.mul(&n, &params[i])?;
            h = ops.add(&g, &params[i + 1])?;
            i += 2;
        }
        h = ops.relu(&h)?;
    }
    Ok(linear(ops, &h, &params[i], &params[i + 1])?)
}
