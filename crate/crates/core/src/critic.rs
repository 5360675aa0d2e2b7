//! Twin soft Q critics: aggregation, Bellman targets and loss.

use std::str::FromStr;

use crate::diffcore::{Eval, Ops, Tensor};
use crate::nets::{critic_forward, CriticConfig, CriticParams, NetError, ParamSet};
use crate::policy::{best_of_k, SmfpActor};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QAgg {
    Min,
    Mean,
}

impl FromStr for QAgg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(QAgg::Min),
            "mean" => Ok(QAgg::Mean),
            other => Err(Error::Invalid(format!("unknown q aggregation mode {other:?}"))),
        }
    }
}

impl QAgg {
    pub fn name(self) -> &'static str {
        match self {
            QAgg::Min => "min",
            QAgg::Mean => "mean",
        }
    }

    pub fn apply<O: Ops>(self, ops: &mut O, q1: &O::V, q2: &O::V) -> Result<O::V, NetError> {
        Ok(match self {
            QAgg::Min => ops.min(q1, q2)?,
            QAgg::Mean => {
                let s = ops.add(q1, q2)?;
                ops.scale(&s, 0.5)?
            }
        })
    }
}

pub fn q_aggregate(q1: f64, q2: f64, mode: QAgg) -> f64 {
    match mode {
        QAgg::Min => q1.min(q2),
        QAgg::Mean => 0.5 * (q1 + q2),
    }
}

/// Aggregated `Q(s, a)` of a twin pair on any backend, `rows × 1`.
pub fn twin_q<O: Ops>(
    ops: &mut O,
    cfg: &CriticConfig,
    q1: &[O::V],
    q2: &[O::V],
    state: &O::V,
    action: &O::V,
    mode: QAgg,
) -> Result<O::V, NetError> {
    let a = critic_forward(ops, cfg, q1, state, action)?;
    let b = critic_forward(ops, cfg, q2, state, action)?;
    mode.apply(ops, &a, &b)
}

/// Aggregated Q values of a twin pair as plain numbers.
pub fn q_values(cfg: &CriticConfig, params: &CriticParams, state: &Tensor, action: &Tensor, mode: QAgg) -> Result<Vec<f64>> {
    let q = twin_q(&mut Eval, cfg, params.q1.tensors(), params.q2.tensors(), state, action, mode)?;
    Ok(q.into_data())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticEnsemble {
    pub cfg: CriticConfig,
    pub online: CriticParams,
    pub target: CriticParams,
    pub q_agg: QAgg,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
}

impl CriticEnsemble {
    pub fn new(cfg: CriticConfig, rng: &mut Rng) -> Self {
        let online = CriticParams::init(&cfg, rng);
        let target = online.clone();
        CriticEnsemble { cfg, online, target, q_agg: QAgg::Min, gamma: 0.99, tau: 0.005, alpha: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Invalid(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Invalid(format!("tau {} outside (0, 1]", self.tau)));
        }
        Ok(())
    }

    pub fn online_q(&self, state: &Tensor, action: &Tensor) -> Result<Vec<f64>> {
        q_values(&self.cfg, &self.online, state, action, self.q_agg)
    }

    pub fn target_q(&self, state: &Tensor, action: &Tensor) -> Result<Vec<f64>> {
        q_values(&self.cfg, &self.target, state, action, self.q_agg)
    }

    /// `r + γ(1 − done)·bracket`, elementwise.
    pub fn bellman(&self, reward: &[f64], done: &[f64], bracket: &[f64]) -> Tensor {
        let y: Vec<f64> = reward
            .iter()
            .zip(done)
            .zip(bracket)
            .map(|((&r, &d), &x)| r + self.gamma * (1.0 - d) * x)
            .collect();
        Tensor::column(&y)
    }

    /// Soft target with the next action chosen best-of-`k_t` under the target
    /// critic and the entropy term `α Σ log σ` of the chosen candidate.
    pub fn critic_target(
        &self,
        actor: &SmfpActor,
        reward: &[f64],
        next_state: &Tensor,
        done: &[f64],
        k_t: usize,
        rng: &mut Rng,
    ) -> Result<Tensor> {
        let sel = best_of_k(actor, next_state, k_t, rng, |s, a| self.target_q(s, a))?;
        let q = self.target_q(next_state, &sel.actions)?;
        let ent = sel.log_sigma.sum_cols();
        let bracket: Vec<f64> = q.iter().zip(ent.data()).map(|(q, h)| q + self.alpha * h).collect();
        Ok(self.bellman(reward, done, &bracket))
    }

    pub fn polyak(&mut self) -> Result<()> {
        crate::nets::polyak_update(&mut self.target.q1, &self.online.q1, self.tau)?;
        crate::nets::polyak_update(&mut self.target.q2, &self.online.q2, self.tau)?;
        Ok(())
    }
}

/// `mean((Q₁ − y)²) + mean((Q₂ − y)²)` against a detached target column.
pub fn critic_loss<O: Ops>(
    ops: &mut O,
    cfg: &CriticConfig,
    q1: &[O::V],
    q2: &[O::V],
    state: &Tensor,
    action: &Tensor,
    target: &Tensor,
) -> Result<O::V> {
    let s = ops.constant(state.clone());
    let a = ops.constant(action.clone());
    let y = ops.constant(target.clone());
    let mut total: Option<O::V> = None;
    for p in [q1, q2] {
        let q = critic_forward(ops, cfg, p, &s, &a)?;
        let d = ops.sub(&q, &y)?;
        let sq = ops.square(&d)?;
        let m = ops.mean(&sq)?;
        total = Some(match total {
            None => m,
            Some(t) => ops.add(&t, &m)?,
        });
    }
    Ok(total.expect("two critics"))
}

/// Plain-value critic loss for a parameter pair.
pub fn critic_loss_value(cfg: &CriticConfig, q1: &ParamSet, q2: &ParamSet, state: &Tensor, action: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(critic_loss(&mut Eval, cfg, q1.tensors(), q2.tensors(), state, action, target)?.item()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tape;
    use crate::envs::ActionBox;
    use crate::nets::ActorConfig;
    use crate::rng::{normal_tensor, seeded};
    use proptest::prelude::*;

    fn ensemble(seed: u64) -> (CriticEnsemble, SmfpActor) {
        let mut rng = seeded(seed);
        let cfg = CriticConfig { hidden: vec![8, 8], ..CriticConfig::new(3, 2) };
        let ens = CriticEnsemble::new(cfg, &mut rng);
        let acfg = ActorConfig { hidden: 8, time_embed_dim: 4, ..ActorConfig::new(3, 2) };
        let actor = SmfpActor::new(acfg, ActionBox::symmetric(2, 1.0), &mut rng);
        (ens, actor)
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(q_aggregate(1.0, 3.0, QAgg::Min), 1.0);
        assert_eq!(q_aggregate(1.0, 3.0, QAgg::Mean), 2.0);
        assert_eq!(q_aggregate(2.5, 2.5, QAgg::Min), 2.5);
        assert_eq!(q_aggregate(2.5, 2.5, QAgg::Mean), 2.5);
        assert!("max".parse::<QAgg>().is_err());
        assert_eq!("min".parse::<QAgg>().unwrap(), QAgg::Min);
    }

    #[test]
    fn bellman_examples() {
        let (mut ens, _) = ensemble(0);
        assert_eq!(ens.bellman(&[1.0], &[1.0], &[5.0]).data(), &[1.0]);
        assert!((ens.bellman(&[1.0], &[0.0], &[2.0]).data()[0] - 2.98).abs() < 1e-15);
        ens.gamma = 0.0;
        assert_eq!(ens.bellman(&[1.5], &[0.0], &[7.0]).data(), &[1.5]);
    }

    #[test]
    fn target_masks_done_rows_and_increases_with_reward() {
        let (ens, actor) = ensemble(1);
        let mut rng = seeded(2);
        let s = normal_tensor(&mut rng, 3, 3);
        let y = ens.critic_target(&actor, &[0.5, 0.5, 1.5], &s, &[1.0, 0.0, 0.0], 4, &mut seeded(9)).unwrap();
        assert_eq!(y.data()[0], 0.5);
        let y2 = ens.critic_target(&actor, &[0.5, 0.7, 1.5], &s, &[1.0, 0.0, 0.0], 4, &mut seeded(9)).unwrap();
        assert!(y2.data()[1] > y.data()[1]);
        assert_eq!(y2.data()[2], y.data()[2]);
    }

    #[test]
    fn loss_examples() {
        let (ens, _) = ensemble(3);
        let mut rng = seeded(4);
        let s = normal_tensor(&mut rng, 5, 3);
        let a = normal_tensor(&mut rng, 5, 2);
        let q1 = critic_forward(&mut Eval, &ens.cfg, ens.online.q1.tensors(), &s, &a).unwrap();
        let mut same = ens.clone();
        same.online.q2 = same.online.q1.clone();
        let l = critic_loss_value(&ens.cfg, &same.online.q1, &same.online.q2, &s, &a, &q1).unwrap();
        assert_eq!(l, 0.0);

        let mut zero = ens.online.q1.clone();
        for t in zero.tensors_mut() {
            *t = Tensor::zeros(t.rows(), t.cols());
        }
        let l = critic_loss_value(&ens.cfg, &zero, &zero, &s.select_rows(&[0]), &a.select_rows(&[0]), &Tensor::scalar(2.0)).unwrap();
        assert_eq!(l, 8.0);
    }

    #[test]
    fn target_parameters_receive_no_gradient() {
        let (ens, actor) = ensemble(5);
        let mut rng = seeded(6);
        let s = normal_tensor(&mut rng, 4, 3);
        let a = normal_tensor(&mut rng, 4, 2);
        let y = ens.critic_target(&actor, &[0.1, 0.2, 0.3, 0.4], &s, &[0.0; 4], 2, &mut rng).unwrap();
        let mut tape = Tape::new();
        let q1: Vec<_> = ens.online.q1.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let q2: Vec<_> = ens.online.q2.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let tq: Vec<_> = ens.target.q1.tensors().iter().chain(ens.target.q2.tensors()).map(|t| tape.param(t.clone())).collect();
        let loss = critic_loss(&mut tape, &ens.cfg, &q1, &q2, &s, &a, &y).unwrap();
        let grads = tape.backward(loss, &tq).unwrap();
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
        let online = tape.backward(loss, &q1).unwrap();
        assert!(online.iter().any(|g| g.data().iter().any(|&v| v != 0.0)));
    }

    #[test]
    fn done_everywhere_without_entropy_is_mse_to_reward() {
        let (mut ens, actor) = ensemble(7);
        ens.alpha = 0.0;
        let mut rng = seeded(8);
        let s = normal_tensor(&mut rng, 4, 3);
        let a = normal_tensor(&mut rng, 4, 2);
        let r = [0.3, -1.0, 2.0, 0.0];
        let y = ens.critic_target(&actor, &r, &s, &[1.0; 4], 4, &mut rng).unwrap();
        assert_eq!(y.data(), &r);
        let l = critic_loss_value(&ens.cfg, &ens.online.q1, &ens.online.q2, &s, &a, &y).unwrap();
        let mut want = 0.0;
        for p in [&ens.online.q1, &ens.online.q2] {
            let q = critic_forward(&mut Eval, &ens.cfg, p.tensors(), &s, &a).unwrap();
            want += q.data().iter().zip(&r).map(|(q, r)| (q - r) * (q - r)).sum::<f64>() / 4.0;
        }
        assert!((l - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn min_never_exceeds_mean(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            prop_assert!(q_aggregate(a, b, QAgg::Min) <= q_aggregate(a, b, QAgg::Mean));
        }
    }
}
