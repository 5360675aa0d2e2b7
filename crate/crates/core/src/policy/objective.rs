use crate::critic::{twin_q, QAgg};
use crate::diffcore::{Ops, Tensor};
use crate::envs::ActionBox;
use crate::nets::{ActorConfig, CriticConfig, CriticParams};
use crate::{Error, Result};

use super::losses::entropy_floor_loss;
use super::meanflow::{md_loss, MdBatch};
use super::smfp::{one_step_sample, NoisePair};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorLossConfig {
    pub alpha: f64,
    pub lambda_md: f64,
    pub kappa_sigma: f64,
    pub huber_delta: f64,
    pub normalize_q_loss: bool,
    pub q_agg: QAgg,
    /// Weight of the squared out-of-box excess of the raw action.
    pub box_penalty: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActorDiagnostics {
    pub q_term: f64,
    pub entropy_term: f64,
    pub md_term: f64,
    pub box_term: f64,
    pub mean_log_sigma: f64,
    /// The detached `mean |Q|` the Q term was divided by (1 when off).
    pub q_scale: f64,
}

/// Fixed inputs of one actor update.
pub struct ActorLossInputs<'a> {
    pub states: &'a Tensor,
    pub noise: &'a NoisePair,
    pub md: Option<&'a MdBatch>,
    /// Use this normaliser instead of the batch `mean |Q|`.
    pub q_scale: Option<f64>,
    /// Score the clamped action with the critic; `None` scores the raw action.
    pub action_box: Option<&'a ActionBox>,
}

/// Clamp `a` into the box and return it with the per-row sum of squared
/// excess, both measured in half-widths.
fn clamp_to_box<O: Ops>(ops: &mut O, a: &O::V, bx: &ActionBox) -> Result<(O::V, O::V)> {
    let center = ops.constant(bx.center());
    let half = ops.constant(bx.half_width());
    let inv_half = ops.constant(bx.half_width().map(|h| 1.0 / h));
    let z = ops.sub(a, &center)?;
    let z = ops.mul(&z, &inv_half)?;
    let zc = ops.clamp(&z, -1.0, 1.0)?;
    let excess = ops.sub(&z, &zc)?;
    let excess = ops.square(&excess)?;
    let excess = ops.sum_cols(&excess)?;
    let clamped = ops.mul(&zc, &half)?;
    Ok((ops.add(&clamped, &center)?, excess))
}

/// `−Q/sg(mean|Q|) + α·floor + λ·L_MD` with one reparameterised sample per
/// state, plus the optional out-of-box penalty.
pub fn actor_loss<O: Ops>(
    ops: &mut O,
    cfg: &ActorConfig,
    params: &[O::V],
    critic_cfg: &CriticConfig,
    critic: &CriticParams,
    hp: &ActorLossConfig,
    inputs: &ActorLossInputs,
) -> Result<(O::V, ActorDiagnostics)> {
    let s = ops.constant(inputs.states.clone());
    let e = ops.constant(inputs.noise.e.clone());
    let eps = ops.constant(inputs.noise.eps.clone());
    let (raw, log_sigma) = one_step_sample(ops, cfg, params, &s, &e, &eps)?;
    let (action, excess) = match inputs.action_box {
        Some(bx) => {
            let (a, x) = clamp_to_box(ops, &raw, bx)?;
            (a, Some(x))
        }
        None => (raw, None),
    };
    let q1 = critic.q1.lift(ops);
    let q2 = critic.q2.lift(ops);
    let q = twin_q(ops, critic_cfg, &q1, &q2, &s, &action, hp.q_agg)?;
    let q_mean = ops.mean(&q)?;
    let q_scale = if hp.normalize_q_loss {
        let m = inputs.q_scale.unwrap_or_else(|| ops.primal(&q).data().iter().map(|v| v.abs()).sum::<f64>() / ops.primal(&q).len() as f64);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    } else {
        1.0
    };
    let mut total = ops.scale(&q_mean, -1.0 / q_scale)?;
    let mut diag = ActorDiagnostics {
        q_term: ops.primal(&total).item()?,
        mean_log_sigma: ops.primal(&log_sigma).mean(),
        q_scale,
        ..Default::default()
    };
    if hp.alpha != 0.0 {
        let floor = entropy_floor_loss(ops, &log_sigma, hp.kappa_sigma)?;
        diag.entropy_term = ops.primal(&floor).item()?;
        let w = ops.scale(&floor, hp.alpha)?;
        total = ops.add(&total, &w)?;
    }
    if hp.lambda_md != 0.0 {
        if let Some(batch) = inputs.md {
            let md = md_loss(ops, cfg, params, batch, hp.huber_delta)?;
            diag.md_term = ops.primal(&md).item()?;
            let w = ops.scale(&md, hp.lambda_md)?;
            total = ops.add(&total, &w)?;
        }
    }
    if let (Some(excess), true) = (excess, hp.box_penalty != 0.0) {
        let pen = ops.mean(&excess)?;
        diag.box_term = ops.primal(&pen).item()?;
        let w = ops.scale(&pen, hp.box_penalty)?;
        total = ops.add(&total, &w)?;
    }
    if !ops.primal(&total).is_finite() {
        return Err(Error::NonFinite { what: "actor loss", step: 0 });
    }
    Ok((total, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{Eval, Tape};
    use crate::nets::{init_actor, init_critic};
    use crate::rng::{normal_tensor, seeded, uniform_tensor};

    fn setup() -> (ActorConfig, crate::nets::ParamSet, CriticConfig, CriticParams) {
        let mut rng = seeded(21);
        let cfg = ActorConfig { hidden: 8, time_embed_dim: 4, ..ActorConfig::new(3, 2) };
        let mut p = init_actor(&cfg, &mut rng);
        for t in p.tensors_mut() {
            t.add_assign(&uniform_tensor(&mut rng, t.rows(), t.cols(), -0.2, 0.2));
        }
        let ccfg = CriticConfig { hidden: vec![8, 8], ..CriticConfig::new(3, 2) };
        let critic = CriticParams { q1: init_critic(&ccfg, &mut rng), q2: init_critic(&ccfg, &mut rng) };
        (cfg, p, ccfg, critic)
    }

    fn hp(alpha: f64, lambda_md: f64) -> ActorLossConfig {
        ActorLossConfig { alpha, lambda_md, kappa_sigma: -3.0, huber_delta: 1.0, normalize_q_loss: true, q_agg: QAgg::Min, box_penalty: 0.0 }
    }

    #[test]
    fn constant_positive_q_normalises_to_minus_one() {
        let (cfg, p, ccfg, mut critic) = setup();
        for set in [&mut critic.q1, &mut critic.q2] {
            let names: Vec<String> = set.names().to_vec();
            for (i, n) in names.iter().enumerate() {
                let t = &mut set.tensors_mut()[i];
                let fill = if n == "out.b" { 2.5 } else { 0.0 };
                *t = Tensor::full(t.rows(), t.cols(), fill);
            }
        }
        let mut rng = seeded(3);
        let s = normal_tensor(&mut rng, 4, 3);
        let noise = NoisePair::draw(&mut rng, 4, 2);
        let inputs = ActorLossInputs { states: &s, noise: &noise, md: None, q_scale: None, action_box: None };
        let (l, d) = actor_loss(&mut Eval, &cfg, p.tensors(), &ccfg, &critic, &hp(0.0, 0.0), &inputs).unwrap();
        assert_eq!(l.item().unwrap(), -1.0);
        assert_eq!(d.q_scale, 2.5);
    }

    #[test]
    fn zero_coefficients_leave_only_the_q_term() {
        let (cfg, p, ccfg, critic) = setup();
        let mut rng = seeded(4);
        let s = normal_tensor(&mut rng, 4, 3);
        let noise = NoisePair::draw(&mut rng, 4, 2);
        let a = normal_tensor(&mut rng, 8, 2);
        let md = MdBatch::build(&cfg, &p, &s.repeat_rows(2), &a, &[1.0; 8], 100, &mut rng).unwrap();
        let inputs = ActorLossInputs { states: &s, noise: &noise, md: Some(&md), q_scale: None, action_box: None };
        let grad = |h: ActorLossConfig| {
            let mut tape = Tape::new();
            let vars: Vec<_> = p.tensors().iter().map(|t| tape.param(t.clone())).collect();
            let (l, d) = actor_loss(&mut tape, &cfg, &vars, &ccfg, &critic, &h, &inputs).unwrap();
            (tape.value(l).item().unwrap(), d, tape.backward(l, &vars).unwrap())
        };
        let (l0, d0, g0) = grad(hp(0.0, 0.0));
        assert_eq!(l0, d0.q_term);
        let (_, d1, g1) = grad(hp(0.2, 0.3));
        assert!(d1.md_term > 0.0);
        assert_ne!(g0, g1);
        let mut plain = hp(0.0, 0.0);
        plain.lambda_md = 0.0;
        let (_, _, g2) = grad(plain);
        assert_eq!(g0, g2);
    }
}
