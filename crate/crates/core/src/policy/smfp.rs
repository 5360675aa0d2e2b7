use crate::diffcore::{Eval, Ops, Tensor};
use crate::envs::ActionBox;
use crate::nets::{actor_forward, init_actor, ActorConfig, NetError, ParamSet};
use crate::rng::{normal_tensor, Rng};
use crate::{Error, Result};

/// Latent noise `e` and conditional noise `eps`, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePair {
    pub e: Tensor,
    pub eps: Tensor,
}

impl NoisePair {
    pub fn draw(rng: &mut Rng, rows: usize, dim: usize) -> Self {
        let e = normal_tensor(rng, rows, dim);
        let eps = normal_tensor(rng, rows, dim);
        NoisePair { e, eps }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        NoisePair { e: self.e.select_rows(idx), eps: self.eps.select_rows(idx) }
    }
}

/// `(1 − t)·a + t·e` for a scalar `t`.
pub fn interpolate(a: &Tensor, e: &Tensor, t: f64) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Invalid(format!("interpolation time {t} outside [0, 1]")));
    }
    Ok(a.broadcast_with(e, "interpolate", |a, e| (1.0 - t) * a + t * e)?)
}

/// Row-wise interpolation with one time per row (`t` is `rows × 1`).
pub fn interpolate_rows(a: &Tensor, e: &Tensor, t: &Tensor) -> Result<Tensor> {
    if t.data().iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Invalid("interpolation time outside [0, 1]".into()));
    }
    let one_minus = t.map(|t| 1.0 - t);
    let x = a.broadcast_with(&one_minus, "interpolate", |a, w| a * w)?;
    let y = e.broadcast_with(t, "interpolate", |e, w| e * w)?;
    Ok(x.zip_map(&y, |x, y| x + y))
}

/// `e − a`, the velocity of the straight path from `a` to `e`.
pub fn conditional_velocity(a: &Tensor, e: &Tensor) -> Result<Tensor> {
    if a.shape() != e.shape() {
        return Err(Error::Invalid(format!("velocity shapes {:?} and {:?}", a.shape(), e.shape())));
    }
    Ok(e.zip_map(a, |e, a| e - a))
}

/// One-step draw `e − u(e, 0, 1) + σ(e, 0, 1)·eps` on any backend.
pub fn one_step_sample<O: Ops>(
    ops: &mut O,
    cfg: &ActorConfig,
    params: &[O::V],
    state: &O::V,
    e: &O::V,
    eps: &O::V,
) -> Result<(O::V, O::V), NetError> {
    let n = ops.primal(state).rows();
    let b = ops.constant(Tensor::zeros(n, 1));
    let t = ops.constant(Tensor::full(n, 1, 1.0));
    let (u, log_sigma) = actor_forward(ops, cfg, params, state, e, &b, &t)?;
    let drift = ops.sub(e, &u)?;
    let sigma = ops.exp(&log_sigma)?;
    let noise = ops.mul(&sigma, eps)?;
    Ok((ops.add(&drift, &noise)?, log_sigma))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmfpActor {
    pub cfg: ActorConfig,
    pub params: ParamSet,
    pub action_box: ActionBox,
    pub kappa_sigma: f64,
    pub alpha: f64,
    pub lambda_md: f64,
    pub time_steps: usize,
    pub huber_delta: f64,
}

impl SmfpActor {
    pub fn new(cfg: ActorConfig, action_box: ActionBox, rng: &mut Rng) -> Self {
        let params = init_actor(&cfg, rng);
        SmfpActor {
            cfg,
            params,
            action_box,
            kappa_sigma: -3.0,
            alpha: 0.2,
            lambda_md: 0.3,
            time_steps: 100,
            huber_delta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfg.log_sigma_min..=self.cfg.log_sigma_max).contains(&self.kappa_sigma) {
            return Err(Error::Invalid(format!("kappa_sigma {} outside the log sigma clamp range", self.kappa_sigma)));
        }
        if self.alpha < 0.0 || self.lambda_md < 0.0 {
            return Err(Error::Invalid("alpha and lambda_md must be non-negative".into()));
        }
        if self.time_steps == 0 || self.huber_delta <= 0.0 {
            return Err(Error::Invalid("time_steps and huber_delta must be positive".into()));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim
    }

    /// `(u, log σ)` at `(a_t, b, t)`; `b` and `t` are `rows × 1`.
    pub fn forward(&self, state: &Tensor, a_t: &Tensor, b: &Tensor, t: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok(actor_forward(&mut Eval, &self.cfg, self.params.tensors(), state, a_t, b, t)?)
    }

    /// Unclamped one-step actions and the log σ used to produce them.
    pub fn sample_raw(&self, state: &Tensor, noise: &NoisePair) -> Result<(Tensor, Tensor)> {
        let d = self.action_dim();
        if noise.e.cols() != d || noise.eps.shape() != noise.e.shape() || noise.e.rows() != state.rows() {
            return Err(Error::Invalid("noise shape does not match batch and action dimension".into()));
        }
        Ok(one_step_sample(&mut Eval, &self.cfg, self.params.tensors(), state, &noise.e, &noise.eps)?)
    }

    pub fn sample_one_step(&self, state: &Tensor, noise: &NoisePair) -> Result<Tensor> {
        let (raw, _) = self.sample_raw(state, noise)?;
        Ok(self.action_box.clamp(&raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform_tensor};

    fn actor(seed: u64) -> SmfpActor {
        let cfg = ActorConfig { hidden: 16, time_embed_dim: 8, ..ActorConfig::new(3, 2) };
        SmfpActor::new(cfg, ActionBox::symmetric(2, 1.0), &mut seeded(seed))
    }

    fn perturbed(seed: u64) -> SmfpActor {
        let mut a = actor(seed);
        let mut rng = seeded(seed + 100);
        for t in a.params.tensors_mut() {
            let noise = uniform_tensor(&mut rng, t.rows(), t.cols(), -0.3, 0.3);
            t.add_assign(&noise);
        }
        a
    }

    #[test]
    fn interpolation_examples() {
        let a = Tensor::row(&[0.0, 0.0]);
        let e = Tensor::row(&[2.0, -2.0]);
        assert_eq!(interpolate(&a, &e, 0.0).unwrap(), a);
        assert_eq!(interpolate(&a, &e, 1.0).unwrap(), e);
        assert_eq!(interpolate(&a, &e, 0.5).unwrap().data(), &[1.0, -1.0]);
        assert!(interpolate(&a, &e, 1.5).is_err());
    }

    #[test]
    fn velocity_examples() {
        let a = Tensor::row(&[1.0, 0.0]);
        let e = Tensor::row(&[0.0, 1.0]);
        assert_eq!(conditional_velocity(&a, &a).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(conditional_velocity(&a, &e).unwrap().data(), &[-1.0, 1.0]);
        assert_eq!(conditional_velocity(&a.scale(2.0), &e.scale(2.0)).unwrap(), conditional_velocity(&a, &e).unwrap().scale(2.0));
    }

    #[test]
    fn fresh_actor_sample_is_e_plus_scaled_eps() {
        let act = actor(0);
        let mut rng = seeded(1);
        let s = uniform_tensor(&mut rng, 5, 3, -1.0, 1.0);
        let n = NoisePair::draw(&mut rng, 5, 2);
        let got = act.sample_one_step(&s, &n).unwrap();
        let want = act.action_box.clamp(&n.e.zip_map(&n.eps, |e, x| e + (-1f64).exp() * x));
        assert_eq!(got, want);
    }

    #[test]
    fn zero_eps_gives_residual_branch() {
        let act = perturbed(2);
        let mut rng = seeded(3);
        let s = uniform_tensor(&mut rng, 4, 3, -1.0, 1.0);
        let mut n = NoisePair::draw(&mut rng, 4, 2);
        n.eps = Tensor::zeros(4, 2);
        let (u, _) = act.forward(&s, &n.e, &Tensor::zeros(4, 1), &Tensor::full(4, 1, 1.0)).unwrap();
        let want = act.action_box.clamp(&n.e.zip_map(&u, |e, u| e - u));
        assert_eq!(act.sample_one_step(&s, &n).unwrap(), want);
    }

    #[test]
    fn sampling_is_deterministic_and_permutation_equivariant() {
        let act = perturbed(4);
        let mut rng = seeded(5);
        let s = uniform_tensor(&mut rng, 6, 3, -1.0, 1.0);
        let n = NoisePair::draw(&mut rng, 6, 2);
        let a = act.sample_one_step(&s, &n).unwrap();
        assert_eq!(a, act.sample_one_step(&s, &n).unwrap());
        let perm = [5, 3, 1, 0, 2, 4];
        let ap = act.sample_one_step(&s.select_rows(&perm), &n.select_rows(&perm)).unwrap();
        assert_eq!(ap, a.select_rows(&perm));
    }

    #[test]
    fn validation() {
        let mut a = actor(0);
        assert!(a.validate().is_ok());
        a.kappa_sigma = -11.0;
        assert!(a.validate().is_err());
        a.kappa_sigma = -3.0;
        a.alpha = -0.1;
        assert!(a.validate().is_err());
    }
}
