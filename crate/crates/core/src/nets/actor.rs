use crate::diffcore::{Ops, Tensor};
use crate::rng::Rng;

use super::params::kaiming_uniform;
use super::{linear, NetError, ParamSet};

const RESIDUAL_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ActorConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    /// Hidden layers in the trunk; all but the first are residual.
    pub depth: usize,
    /// Sinusoidal features per time variable (even).
    pub time_embed_dim: usize,
    pub log_sigma_min: f64,
    pub log_sigma_max: f64,
    /// Initial bias of the log σ head.
    pub log_sigma_init: f64,
}

impl ActorConfig {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        ActorConfig {
            state_dim,
            action_dim,
            hidden: 256,
            depth: 3,
            time_embed_dim: 64,
            log_sigma_min: -10.0,
            log_sigma_max: 2.0,
            log_sigma_init: -1.0,
        }
    }

    fn input_dim(&self) -> usize {
        self.state_dim + self.action_dim + 2 * self.time_embed_dim
    }

    /// Geometric frequencies from 1 to 32.
    pub fn frequencies(&self) -> Tensor {
        let k = (self.time_embed_dim / 2).max(1);
        let f: Vec<f64> = (0..k)
            .map(|i| if k == 1 { 1.0 } else { 32f64.powf(i as f64 / (k - 1) as f64) })
            .collect();
        Tensor::row(&f)
    }
}

/// Kaiming-uniform trunk; both output heads start at exactly zero weight.
pub fn init_actor(cfg: &ActorConfig, rng: &mut Rng) -> ParamSet {
    let mut p = ParamSet::new();
    let h = cfg.hidden;
    p.push("in.w", kaiming_uniform(rng, cfg.input_dim(), h));
    p.push("in.b", Tensor::zeros(1, h));
    for i in 1..cfg.depth.max(1) {
        p.push(format!("res{i}.w"), kaiming_uniform(rng, h, h));
        p.push(format!("res{i}.b"), Tensor::zeros(1, h));
    }
    p.push("u.w", Tensor::zeros(h, cfg.action_dim));
    p.push("u.b", Tensor::zeros(1, cfg.action_dim));
    p.push("log_sigma.w", Tensor::zeros(h, cfg.action_dim));
    p.push("log_sigma.b", Tensor::full(1, cfg.action_dim, cfg.log_sigma_init));
    p
}

fn embed<O: Ops>(ops: &mut O, freqs: &O::V, t: &O::V) -> Result<O::V, NetError> {
    let phase = ops.matmul(t, freqs)?;
    let s = ops.sin(&phase)?;
    let c = ops.cos(&phase)?;
    Ok(ops.concat_cols(&[&s, &c])?)
}

/// Returns `(u, log σ)`, each `batch × action_dim`.
///
/// `b` and `t` are `batch × 1` columns. `params` follows the order of
/// [`init_actor`].
pub fn actor_forward<O: Ops>(
    ops: &mut O,
    cfg: &ActorConfig,
    params: &[O::V],
    state: &O::V,
    a_t: &O::V,
    b: &O::V,
    t: &O::V,
) -> Result<(O::V, O::V), NetError> {
    if ops.primal(b).data().iter().zip(ops.primal(t).data()).any(|(b, t)| b > t) {
        return Err(NetError::TimeOrder);
    }
    let freqs = ops.constant(cfg.frequencies());
    let eb = embed(ops, &freqs, b)?;
    let et = embed(ops, &freqs, t)?;
    let x = ops.concat_cols(&[state, a_t, &eb, &et])?;
    let mut i = 0;
    let pre = linear(ops, &x, &params[i], &params[i + 1])?;
    let mut h = ops.silu(&pre)?;
    i += 2;
    for _ in 1..cfg.depth.max(1) {
        let z = linear(ops, &h, &params[i], &params[i + 1])?;
        let z = ops.silu(&z)?;
        let z = ops.scale(&z, RESIDUAL_SCALE)?;
        h = ops.add(&h, &z)?;
        i += 2;
    }
    let u = linear(ops, &h, &params[i], &params[i + 1])?;
    let raw = linear(ops, &h, &params[i + 2], &params[i + 3])?;
    let log_sigma = ops.clamp(&raw, cfg.log_sigma_min, cfg.log_sigma_max)?;
    Ok((u, log_sigma))
}
