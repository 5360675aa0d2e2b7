//! Regression target for the stochastic generator and the weighted
//! regression loss built on it.

use crate::diffcore::{jvp, Ops, Tensor};
use crate::nets::{actor_forward, ActorConfig, NetError, ParamSet};
use crate::rng::{index, uniform, Rng};
use crate::{Error, Result};

use super::smfp::{conditional_velocity, interpolate_rows, NoisePair};

/// A conditional Gaussian field `(u, log σ)` over `(a_t, b, t)`.
pub trait StochasticField {
    fn eval<O: Ops>(&self, ops: &mut O, a_t: &O::V, b: &O::V, t: &O::V) -> Result<(O::V, O::V), NetError>;
}

/// The actor network at fixed parameters and states.
pub struct ActorField<'a> {
    pub cfg: &'a ActorConfig,
    pub params: &'a ParamSet,
    pub state: &'a Tensor,
}

impl StochasticField for ActorField<'_> {
    fn eval<O: Ops>(&self, ops: &mut O, a_t: &O::V, b: &O::V, t: &O::V) -> Result<(O::V, O::V), NetError> {
        let p = self.params.lift(ops);
        let s = ops.constant(self.state.clone());
        actor_forward(ops, self.cfg, &p, &s, a_t, b, t)
    }
}

/// Everything computed on the way to the target, row-aligned.
#[derive(Clone, Debug)]
pub struct TargetParts {
    pub a_t: Tensor,
    pub v: Tensor,
    pub g: Tensor,
    pub sigma: Tensor,
    /// Total time derivative of `g` along `(v, 0, 1)`.
    pub d_g: Tensor,
    /// Total time derivative of `σ` along `(v, 0, 1)`.
    pub d_sigma: Tensor,
    pub target: Tensor,
}

fn check_times(b: &Tensor, t: &Tensor, rows: usize) -> Result<()> {
    if b.shape() != [rows, 1] || t.shape() != [rows, 1] {
        return Err(Error::Invalid("time columns must be rows x 1".into()));
    }
    for (&b, &t) in b.data().iter().zip(t.data()) {
        if !(0.0 <= b && b <= t && t <= 1.0) {
            return Err(Error::Net(NetError::TimeOrder));
        }
    }
    Ok(())
}

/// Target `a_t + (t−b−1)v + σ⊙ε − (t−b)[ġ − σ̇⊙ε]` with both derivatives
/// from one forward-mode pass.
pub fn g_tgt_parts<F: StochasticField>(field: &F, a: &Tensor, noise: &NoisePair, b: &Tensor, t: &Tensor) -> Result<TargetParts> {
    check_times(b, t, a.rows())?;
    let a_t = interpolate_rows(a, &noise.e, t)?;
    let v = conditional_velocity(a, &noise.e)?;
    let eps = noise.eps.clone();
    let tangents = [v.clone(), Tensor::zeros(b.rows(), 1), Tensor::full(t.rows(), 1, 1.0)];
    let mut out = jvp(
        |ops, x| {
            let (u, log_sigma) = field.eval(ops, &x[0], &x[1], &x[2]).map_err(|e| match e {
                NetError::Diff(d) => d,
                other => crate::diffcore::DiffError::Invalid(other.to_string()),
            })?;
            let sigma = ops.exp(&log_sigma)?;
            let e = ops.constant(eps);
            let drift = ops.sub(&x[0], &u)?;
            let noise = ops.mul(&sigma, &e)?;
            let g = ops.add(&drift, &noise)?;
            Ok(vec![g, sigma])
        },
        &[a_t.clone(), b.clone(), t.clone()],
        &tangents,
    )?;
    let (sigma, d_sigma) = out.pop().expect("two outputs");
    let (g, d_g) = out.pop().expect("two outputs");
    let d = a.cols();
    let mut target = Tensor::zeros(a.rows(), d);
    for r in 0..a.rows() {
        let gap = t.get(r, 0) - b.get(r, 0);
        for c in 0..d {
            let se = sigma.get(r, c) * noise.eps.get(r, c);
            let bracket = d_g.get(r, c) - d_sigma.get(r, c) * noise.eps.get(r, c);
            target.data_mut()[r * d + c] = a_t.get(r, c) + (gap - 1.0) * v.get(r, c) + se - gap * bracket;
        }
    }
    Ok(TargetParts { a_t, v, g, sigma, d_g, d_sigma, target })
}

/// Detached regression target for data actions `a`.
pub fn compute_g_tgt<F: StochasticField>(field: &F, a: &Tensor, noise: &NoisePair, b: &Tensor, t: &Tensor) -> Result<Tensor> {
    Ok(g_tgt_parts(field, a, noise, b, t)?.target)
}

/// `(b, t)` columns: the one-step corner `(0, 1)` with probability one half,
/// otherwise `t` uniform on `{1/T, …, 1}` and `b` uniform on grid points in `[0, t]`.
pub fn sample_time_pairs(rng: &mut Rng, rows: usize, time_steps: usize) -> (Tensor, Tensor) {
    let mut b = Vec::with_capacity(rows);
    let mut t = Vec::with_capacity(rows);
    let steps = time_steps as f64;
    for _ in 0..rows {
        if uniform(rng, 0.0, 1.0) < 0.5 {
            b.push(0.0);
            t.push(1.0);
        } else {
            let k = 1 + index(rng, time_steps);
            let j = index(rng, k + 1);
            t.push(k as f64 / steps);
            b.push(j as f64 / steps);
        }
    }
    (Tensor::column(&b), Tensor::column(&t))
}

/// Weighted regression pairs with their detached targets. Only rows with a
/// positive weight are stored; `total_pairs` counts all of them.
#[derive(Clone, Debug)]
pub struct MdBatch {
    pub states: Tensor,
    pub a: Tensor,
    pub noise: NoisePair,
    pub b: Tensor,
    pub t: Tensor,
    pub target: Tensor,
    pub weights: Tensor,
    pub total_pairs: usize,
}

impl MdBatch {
    /// Keep pairs with positive weight, draw fresh noise and times, and
    /// compute their targets under `params`.
    pub fn build(
        cfg: &ActorConfig,
        params: &ParamSet,
        states: &Tensor,
        actions: &Tensor,
        weights: &[f64],
        time_steps: usize,
        rng: &mut Rng,
    ) -> Result<MdBatch> {
        let total_pairs = weights.len();
        let keep: Vec<usize> = (0..total_pairs).filter(|&i| weights[i] > 0.0).collect();
        let n = keep.len();
        let states = states.select_rows(&keep);
        let a = actions.select_rows(&keep);
        let noise = NoisePair::draw(rng, n, cfg.action_dim);
        let (b, t) = sample_time_pairs(rng, n, time_steps);
        let w = Tensor::column(&keep.iter().map(|&i| weights[i]).collect::<Vec<_>>());
        let target = if n == 0 {
            Tensor::zeros(0, cfg.action_dim)
        } else {
            compute_g_tgt(&ActorField { cfg, params, state: &states }, &a, &noise, &b, &t)?
        };
        Ok(MdBatch { states, a, noise, b, t, target, weights: w, total_pairs })
    }

    pub fn is_empty(&self) -> bool {
        self.a.rows() == 0
    }
}

/// `Σ_p w_p · mean_i huber(g_p − target_p) / total_pairs`.
pub fn md_loss<O: Ops>(ops: &mut O, cfg: &ActorConfig, params: &[O::V], batch: &MdBatch, delta: f64) -> Result<O::V> {
    if batch.is_empty() || batch.total_pairs == 0 {
        return Ok(ops.constant(Tensor::scalar(0.0)));
    }
    let a_t = interpolate_rows(&batch.a, &batch.noise.e, &batch.t)?;
    let a_t = ops.constant(a_t);
    let s = ops.constant(batch.states.clone());
    let b = ops.constant(batch.b.clone());
    let t = ops.constant(batch.t.clone());
    let (u, log_sigma) = actor_forward(ops, cfg, params, &s, &a_t, &b, &t)?;
    let sigma = ops.exp(&log_sigma)?;
    let eps = ops.constant(batch.noise.eps.clone());
    let drift = ops.sub(&a_t, &u)?;
    let noise = ops.mul(&sigma, &eps)?;
    let g = ops.add(&drift, &noise)?;
    let target = ops.constant(batch.target.clone());
    let r = ops.sub(&g, &target)?;
    let h = ops.huber(&r, delta)?;
    let per_pair = ops.mean_cols(&h)?;
    let w = ops.constant(batch.weights.clone());
    let weighted = ops.mul(&per_pair, &w)?;
    let total = ops.sum(&weighted)?;
    Ok(ops.scale(&total, 1.0 / batch.total_pairs as f64)?)
}
