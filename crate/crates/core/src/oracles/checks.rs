//! Named oracle suites with one pass/fail outcome per assertion.

use crate::critic::{critic_loss, QAgg};
use crate::diffcore::{jvp, Eval, Ops, Tape, Tensor, Var};
use crate::envs::ActionBox;
use crate::nets::{actor_forward, init_actor, init_critic, ActorConfig, CriticConfig, CriticParams, ParamSet};
use crate::policy::{
    actor_loss, entropy_floor_loss, g_tgt_parts, gaussian_actor_loss, md_loss, ActorField, ActorLossConfig,
    ActorLossInputs, GaussianActor, GaussianConfig, MdBatch, NoisePair, SmfpActor,
};
use crate::rng::{index, normal_tensor, seeded, uniform, uniform_tensor, Rng};
use crate::{Error, Result};

use super::entropy::{
    conditional_entropy_bound, gaussian_entropy, gaussian_kl_sigma_grad, marginal_entropy_quadrature,
    neg_log_sigma_grad, HERMITE_NODES,
};
use super::fd::{finite_diff_directional, finite_diff_grad, relative_error};
use super::pmd::{pmd_brute_force, pmd_closed_form, pmd_objective, simplex_grid_min, DiscretePmd};

pub const SUITES: [&str; 5] = ["autodiff", "meanflow", "pmd", "entropy", "all"];

pub const GRAD_TOL: f64 = 1e-4;
pub const NET_GRAD_TOL: f64 = 1e-5;
pub const JVP_TOL: f64 = 1e-4;
pub const CONSTANT_TARGET_TOL: f64 = 1e-12;
pub const PMD_TOL: f64 = 1e-10;
pub const SHIFT_TOL: f64 = 1e-12;
pub const ENTROPY_SLACK: f64 = 1e-3;
pub const KL_LIMIT_TOL: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
const SEEDS: u64 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    /// Worst observed error against its tolerance.
    pub detail: String,
}

fn outcome(suite: &'static str, name: &str, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome { suite, name: name.into(), passed: worst < tol, detail: format!("worst {worst:.3e} < {tol:.0e}") }
}

pub fn run_suite(name: &str) -> Result<Vec<CheckOutcome>> {
    match name {
        "autodiff" => autodiff_suite(),
        "meanflow" => meanflow_suite(),
        "pmd" => pmd_suite(),
        "entropy" => entropy_suite(),
        "all" => {
            let mut out = autodiff_suite()?;
            out.extend(meanflow_suite()?);
            out.extend(pmd_suite()?);
            out.extend(entropy_suite()?);
            Ok(out)
        }
        other => Err(Error::Invalid(format!("unknown suite {other:?}"))),
    }
}

fn perturb(p: &mut ParamSet, rng: &mut Rng, scale: f64) {
    for t in p.tensors_mut() {
        t.add_assign(&uniform_tensor(rng, t.rows(), t.cols(), -scale, scale));
    }
}

/// Marker error for a probe point within one difference step of a kink.
fn kink() -> Error {
    Error::Invalid("difference step straddles a kink".into())
}

/// Tape gradient of a scalar loss of one parameter set, and the matching
/// central-difference estimate. Points where steps `h` and `h/4` disagree
/// sit next to a ReLU or hinge kink and are rejected.
fn grad_pair(params: &ParamSet, loss: impl Fn(&mut Tape, &[Var]) -> Result<Var>, value: impl Fn(&ParamSet) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors().iter().map(|t| tape.param(t.clone())).collect();
    let l = loss(&mut tape, &vars)?;
    let g: Vec<f64> = tape.backward(l, &vars)?.iter().flat_map(|t| t.data().to_vec()).collect();
    let fd = finite_diff_grad(|x| value(&params.with_flat(x)), &params.flatten(), FD_STEP);
    let fine = finite_diff_grad(|x| value(&params.with_flat(x)), &params.flatten(), FD_STEP / 4.0);
    if relative_error(&fd, &fine) > 1e-6 {
        return Err(kink());
    }
    Ok((g, fd))
}

fn tiny_actor(rng: &mut Rng) -> (ActorConfig, ParamSet) {
    let cfg = ActorConfig { hidden: 8, depth: 2, time_embed_dim: 4, ..ActorConfig::new(3, 2) };
    let mut p = init_actor(&cfg, rng);
    perturb(&mut p, rng, 0.3);
    (cfg, p)
}

fn tiny_critic(rng: &mut Rng) -> (CriticConfig, CriticParams) {
    let cfg = CriticConfig { hidden: vec![8, 8], ..CriticConfig::new(3, 2) };
    let mut c = CriticParams { q1: init_critic(&cfg, rng), q2: init_critic(&cfg, rng) };
    perturb(&mut c.q1, rng, 0.1);
    perturb(&mut c.q2, rng, 0.1);
    (cfg, c)
}

fn two_layer_net_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut p = ParamSet::new();
    p.push("w1", normal_tensor(&mut rng, 3, 6));
    p.push("b1", normal_tensor(&mut rng, 1, 6));
    p.push("w2", normal_tensor(&mut rng, 6, 2));
    p.push("b2", normal_tensor(&mut rng, 1, 2));
    let x = normal_tensor(&mut rng, 5, 3);
    fn net<O: Ops>(ops: &mut O, p: &[O::V], x: &Tensor) -> Result<O::V> {
        let x = ops.constant(x.clone());
        let h = ops.matmul(&x, &p[0])?;
        let h = ops.add(&h, &p[1])?;
        let h = ops.tanh(&h)?;
        let y = ops.matmul(&h, &p[2])?;
        let y = ops.add(&y, &p[3])?;
        let y = ops.square(&y)?;
        Ok(ops.mean(&y)?)
    }
    let (g, fd) = grad_pair(&p, |tape, v| net(tape, v, &x), |q| net(&mut Eval, q.tensors(), &x).and_then(|t| Ok(t.item()?)).unwrap_or(f64::NAN))?;
    Ok(relative_error(&g, &fd))
}

fn actor_loss_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let (cfg, p) = tiny_actor(&mut rng);
    let (ccfg, critic) = tiny_critic(&mut rng);
    let states = normal_tensor(&mut rng, 4, 3);
    let noise = NoisePair::draw(&mut rng, 4, 2);
    let props = normal_tensor(&mut rng, 8, 2);
    let weights: Vec<f64> = (0..8).map(|_| uniform(&mut rng, 0.0, 1.0)).collect();
    let md = MdBatch::build(&cfg, &p, &states.repeat_rows(2), &props, &weights, 100, &mut rng)?;
    // A high floor keeps the hinge active and a narrow box keeps the clamp
    // and its penalty active, so every term's gradient is exercised.
    let hp = ActorLossConfig {
        alpha: 0.2,
        lambda_md: 0.3,
        kappa_sigma: 1.0,
        huber_delta: 1.0,
        normalize_q_loss: true,
        q_agg: QAgg::Min,
        box_penalty: 0.5,
    };
    let bx = ActionBox::symmetric(2, 0.5);
    let first = ActorLossInputs { states: &states, noise: &noise, md: Some(&md), q_scale: None, action_box: Some(&bx) };
    let (_, diag) = actor_loss(&mut Eval, &cfg, p.tensors(), &ccfg, &critic, &hp, &first)?;
    let inputs = ActorLossInputs { q_scale: Some(diag.q_scale), ..first };
    let (g, fd) = grad_pair(
        &p,
        |tape, v| Ok(actor_loss(tape, &cfg, v, &ccfg, &critic, &hp, &inputs)?.0),
        |q| actor_loss(&mut Eval, &cfg, q.tensors(), &ccfg, &critic, &hp, &inputs).map(|r| r.0.item().unwrap_or(f64::NAN)).unwrap_or(f64::NAN),
    )?;
    Ok(relative_error(&g, &fd))
}

fn critic_loss_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let (ccfg, critic) = tiny_critic(&mut rng);
    let s = normal_tensor(&mut rng, 4, 3);
    let a = normal_tensor(&mut rng, 4, 2);
    let y = normal_tensor(&mut rng, 4, 1);
    let mut joint = critic.q1.clone();
    for (n, t) in critic.q2.iter() {
        joint.push(format!("q2.{n}"), t.clone());
    }
    let k = critic.q1.len();
    let (g, fd) = grad_pair(
        &joint,
        |tape, v| critic_loss(tape, &ccfg, &v[..k], &v[k..], &s, &a, &y),
        |q| critic_loss(&mut Eval, &ccfg, &q.tensors()[..k], &q.tensors()[k..], &s, &a, &y).map(|t| t.item().unwrap_or(f64::NAN)).unwrap_or(f64::NAN),
    )?;
    Ok(relative_error(&g, &fd))
}

fn floor_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut p = ParamSet::new();
    // Rows straddle kappa so both hinge branches appear.
    let mut ls = uniform_tensor(&mut rng, 4, 2, -4.0, -2.0);
    for c in 0..2 {
        ls.data_mut()[c] = -3.9 + 0.2 * c as f64;
    }
    p.push("log_sigma", ls);
    let (g, fd) = grad_pair(&p, |tape, v| Ok(entropy_floor_loss(tape, &v[0], -3.0)?), |q| {
        entropy_floor_loss(&mut Eval, &q.tensors()[0], -3.0).map(|t| t.item().unwrap_or(f64::NAN)).unwrap_or(f64::NAN)
    })?;
    Ok(relative_error(&g, &fd))
}

fn md_loss_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let (cfg, p) = tiny_actor(&mut rng);
    let states = normal_tensor(&mut rng, 4, 3);
    let props = normal_tensor(&mut rng, 4, 2);
    let weights: Vec<f64> = (0..4).map(|i| if i == 0 { 0.0 } else { uniform(&mut rng, 0.1, 2.0) }).collect();
    let md = MdBatch::build(&cfg, &p, &states, &props, &weights, 100, &mut rng)?;
    // Move away from the snapshot so the residuals are non-zero.
    let mut moved = p.clone();
    perturb(&mut moved, &mut rng, 0.2);
    let (g, fd) = grad_pair(&moved, |tape, v| md_loss(tape, &cfg, v, &md, 0.05), |q| {
        md_loss(&mut Eval, &cfg, q.tensors(), &md, 0.05).map(|t| t.item().unwrap_or(f64::NAN)).unwrap_or(f64::NAN)
    })?;
    Ok(relative_error(&g, &fd))
}

pub fn gaussian_loss_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let gcfg = GaussianConfig { hidden: 8, depth: 2, ..GaussianConfig::new(3, 2) };
    let mut g = GaussianActor::new(gcfg, ActionBox::symmetric(2, 1.0), &mut rng);
    perturb(&mut g.params, &mut rng, 0.3);
    let (ccfg, critic) = tiny_critic(&mut rng);
    let s = normal_tensor(&mut rng, 4, 3);
    let eps = normal_tensor(&mut rng, 4, 2);
    let f = |ops_params: &ParamSet| {
        gaussian_actor_loss(&mut Eval, &g.cfg, ops_params.tensors(), &g.action_box, &ccfg, &critic, QAgg::Min, 0.2, &s, &eps)
            .map(|t| t.item().unwrap_or(f64::NAN))
            .unwrap_or(f64::NAN)
    };
    let (gr, fd) = grad_pair(&g.params, |tape, v| gaussian_actor_loss(tape, &g.cfg, v, &g.action_box, &ccfg, &critic, QAgg::Min, 0.2, &s, &eps), f)?;
    Ok(relative_error(&gr, &fd))
}

fn actor_jvp_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let (cfg, p) = tiny_actor(&mut rng);
    let s = normal_tensor(&mut rng, 4, 3);
    let a_t = normal_tensor(&mut rng, 4, 2);
    let t = uniform_tensor(&mut rng, 4, 1, 0.5, 0.9);
    let b = uniform_tensor(&mut rng, 4, 1, 0.0, 0.4);
    let v = normal_tensor(&mut rng, 4, 2);
    let db = normal_tensor(&mut rng, 4, 1);
    let dt = normal_tensor(&mut rng, 4, 1);
    let out = jvp(
        |ops, x| {
            let pv = p.lift(ops);
            let sv = ops.constant(s.clone());
            let (u, ls) = actor_forward(ops, &cfg, &pv, &sv, &x[0], &x[1], &x[2]).map_err(|e| crate::diffcore::DiffError::Invalid(e.to_string()))?;
            Ok(vec![u, ls])
        },
        &[a_t.clone(), b.clone(), t.clone()],
        &[v.clone(), db.clone(), dt.clone()],
    )?;
    let tangent: Vec<f64> = out.iter().flat_map(|(_, d)| d.data().to_vec()).collect();
    let x0: Vec<f64> = [a_t.data(), b.data(), t.data()].concat();
    let dir: Vec<f64> = [v.data(), db.data(), dt.data()].concat();
    let fd = finite_diff_directional(
        |x| {
            let a = Tensor::from_vec(4, 2, x[..8].to_vec()).expect("sized");
            let b = Tensor::from_vec(4, 1, x[8..12].to_vec()).expect("sized");
            let t = Tensor::from_vec(4, 1, x[12..].to_vec()).expect("sized");
            match actor_forward(&mut Eval, &cfg, p.tensors(), &s, &a, &b, &t) {
                Ok((u, ls)) => [u.data(), ls.data()].concat(),
                Err(_) => vec![f64::NAN; 16],
            }
        },
        &x0,
        &dir,
        FD_STEP,
    );
    Ok(relative_error(&tangent, &fd))
}

/// Worst error over the seed set; a seed whose probe lands on a kink is
/// replaced by the next unused seed.
fn worst_over_seeds(f: impl Fn(u64) -> Result<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut next = SEEDS;
    for seed in 0..SEEDS {
        let mut s = seed;
        let e = loop {
            match f(s) {
                Err(Error::Invalid(m)) if m == kink().to_string() && next < 10 * SEEDS => {
                    s = next;
                    next += 1;
                }
                other => break other?,
            }
        };
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
    }
    Ok(worst)
}

fn autodiff_suite() -> Result<Vec<CheckOutcome>> {
    let s = "autodiff";
    Ok(vec![
        outcome(s, "two-layer network backward matches central differences", worst_over_seeds(two_layer_net_error)?, NET_GRAD_TOL),
        outcome(s, "actor loss gradient matches central differences", worst_over_seeds(actor_loss_error)?, GRAD_TOL),
        outcome(s, "critic loss gradient matches central differences", worst_over_seeds(critic_loss_error)?, GRAD_TOL),
        outcome(s, "entropy floor gradient matches central differences", worst_over_seeds(floor_error)?, GRAD_TOL),
        outcome(s, "regression loss gradient matches central differences", worst_over_seeds(md_loss_error)?, GRAD_TOL),
        outcome(s, "gaussian actor loss gradient matches central differences", worst_over_seeds(gaussian_loss_error)?, GRAD_TOL),
        outcome(s, "actor jvp matches directional differences", worst_over_seeds(actor_jvp_error)?, JVP_TOL),
    ])
}

fn constant_actor(rng: &mut Rng, c1: &Tensor, c2: &Tensor) -> (ActorConfig, ParamSet) {
    let cfg = ActorConfig { hidden: 8, depth: 2, time_embed_dim: 4, ..ActorConfig::new(3, 2) };
    let mut p = init_actor(&cfg, rng);
    let names: Vec<String> = p.names().to_vec();
    for (i, n) in names.iter().enumerate() {
        let t = &mut p.tensors_mut()[i];
        *t = match n.as_str() {
            "u.b" => c1.clone(),
            "log_sigma.b" => c2.clone(),
            _ => Tensor::zeros(t.rows(), t.cols()),
        };
    }
    (cfg, p)
}

fn constant_target_error(seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let c1 = normal_tensor(&mut rng, 1, 2);
    let c2 = uniform_tensor(&mut rng, 1, 2, -2.0, 0.5);
    let (cfg, p) = constant_actor(&mut rng, &c1, &c2);
    let n = 6;
    let s = normal_tensor(&mut rng, n, 3);
    let a = normal_tensor(&mut rng, n, 2);
    let noise = NoisePair::draw(&mut rng, n, 2);
    let t = uniform_tensor(&mut rng, n, 1, 0.0, 1.0);
    let b = Tensor::column(&t.data().iter().map(|&t| uniform(&mut rng, 0.0, t)).collect::<Vec<_>>());
    let parts = g_tgt_parts(&ActorField { cfg: &cfg, params: &p, state: &s }, &a, &noise, &b, &t)?;
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..2 {
            let (a, e, eps, t) = (a.get(r, c), noise.e.get(r, c), noise.eps.get(r, c), t.get(r, 0));
            let a_t = (1.0 - t) * a + t * e;
            let want = a_t - (e - a) + c2.get(0, c).exp() * eps;
            worst = worst.max((parts.target.get(r, c) - want).abs());
        }
    }
    Ok(worst)
}

/// `(ġ, σ̇)` from the forward-mode pass against differences of `g` and `σ`
/// along `(a_t + h·v, b, t + h)`, over `pairs` random time pairs.
pub fn target_bracket_error(seed: u64, pairs: usize) -> Result<f64> {
    let mut rng = seeded(seed);
    let (cfg, p) = tiny_actor(&mut rng);
    let s = normal_tensor(&mut rng, pairs, 3);
    let a = normal_tensor(&mut rng, pairs, 2);
    let noise = NoisePair::draw(&mut rng, pairs, 2);
    // Keep t + h inside [0, 1].
    let t = uniform_tensor(&mut rng, pairs, 1, 0.05, 0.95);
    let b = Tensor::column(&t.data().iter().map(|&t| uniform(&mut rng, 0.0, t)).collect::<Vec<_>>());
    let field = ActorField { cfg: &cfg, params: &p, state: &s };
    let parts = g_tgt_parts(&field, &a, &noise, &b, &t)?;
    let eval = |h: f64| -> Result<(Tensor, Tensor)> {
        let a_t = parts.a_t.zip_map(&parts.v, |x, v| x + h * v);
        let th = t.map(|x| x + h);
        let (u, ls) = actor_forward(&mut Eval, &cfg, p.tensors(), &s, &a_t, &b, &th)?;
        let sigma = ls.map(f64::exp);
        let g = a_t.zip_map(&u, |x, u| x - u).zip_map(&sigma.zip_map(&noise.eps, |s, e| s * e), |x, y| x + y);
        Ok((g, sigma))
    };
    let (gp, sp) = eval(FD_STEP)?;
    let (gm, sm) = eval(-FD_STEP)?;
    let fd_g = gp.zip_map(&gm, |x, y| (x - y) / (2.0 * FD_STEP));
    let fd_s = sp.zip_map(&sm, |x, y| (x - y) / (2.0 * FD_STEP));
    let analytic = [parts.d_g.data(), parts.d_sigma.data()].concat();
    let fd = [fd_g.data(), fd_s.data()].concat();
    Ok(relative_error(&analytic, &fd))
}

fn meanflow_suite() -> Result<Vec<CheckOutcome>> {
    let s = "meanflow";
    Ok(vec![
        outcome(s, "target equals the closed form for constant networks", worst_over_seeds(constant_target_error)?, CONSTANT_TARGET_TOL),
        outcome(s, "target derivative bracket matches differences over 50 time pairs", target_bracket_error(7, 50)?, JVP_TOL),
    ])
}

fn random_pmd(rng: &mut Rng, n: usize) -> Result<DiscretePmd> {
    let raw: Vec<f64> = (0..n).map(|_| uniform(rng, 0.0, 1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut prior: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    let rest: f64 = prior[1..].iter().sum();
    prior[0] = 1.0 - rest;
    let q = (0..n).map(|_| uniform(rng, -5.0, 5.0)).collect();
    DiscretePmd::new(prior, q, uniform(rng, 0.1, 5.0))
}

fn pmd_suite() -> Result<Vec<CheckOutcome>> {
    let s = "pmd";
    let mut rng = seeded(3);
    let (mut brute, mut shift, mut mass): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let n = 2 + index(&mut rng, 9);
        let p = random_pmd(&mut rng, n)?;
        let out = pmd_closed_form(&p)?;
        let bf = pmd_brute_force(&p);
        brute = brute.max(out.iter().zip(&bf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        mass = mass.max((out.iter().sum::<f64>() - 1.0).abs());
        let k = uniform(&mut rng, -50.0, 50.0);
        let shifted = pmd_closed_form(&DiscretePmd { q: p.q.iter().map(|q| q + k).collect(), ..p.clone() })?;
        shift = shift.max(out.iter().zip(&shifted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let mut grid_gap: f64 = 0.0;
    for _ in 0..20 {
        let p = random_pmd(&mut rng, 3)?;
        let star = pmd_objective(&p, &pmd_closed_form(&p)?)?;
        let (_, best) = simplex_grid_min(&p, 0.01)?;
        grid_gap = grid_gap.max(star - best);
    }
    let wide = DiscretePmd::new(vec![0.2, 0.5, 0.3], vec![1.0, -2.0, 3.0], 1e6)?;
    let out = pmd_closed_form(&wide)?;
    let tv = out.iter().zip(&wide.prior).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    Ok(vec![
        outcome(s, "closed form equals brute-force normalisation on 1000 instances", brute, PMD_TOL),
        outcome(s, "closed form sums to one", mass, SHIFT_TOL),
        outcome(s, "closed form is invariant to shifting q", shift, SHIFT_TOL),
        outcome(s, "closed form is no worse than the 0.01 simplex grid", grid_gap.max(0.0), 1e-12),
        outcome(s, "large lambda keeps the prior", tv, 1e-3),
    ])
}

fn entropy_suite() -> Result<Vec<CheckOutcome>> {
    let s = "entropy";
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..SEEDS {
        let mut rng = seeded(seed);
        let cfg = ActorConfig { hidden: 16, depth: 2, time_embed_dim: 4, ..ActorConfig::new(1, 1) };
        let mut actor = SmfpActor::new(cfg, ActionBox::symmetric(1, 10.0), &mut rng);
        perturb(&mut actor.params, &mut rng, 0.5);
        let state = [uniform(&mut rng, -1.0, 1.0)];
        let h = marginal_entropy_quadrature(&actor, &state, HERMITE_NODES)?;
        let lb = conditional_entropy_bound(&actor, &state, HERMITE_NODES)?;
        worst_gap = worst_gap.max(lb - h);
    }
    let sig = 0.3f64;
    let cfg = ActorConfig { hidden: 8, time_embed_dim: 4, log_sigma_init: sig.ln(), ..ActorConfig::new(1, 1) };
    let flat = SmfpActor::new(cfg, ActionBox::symmetric(1, 10.0), &mut seeded(0));
    let conv = (marginal_entropy_quadrature(&flat, &[0.0], HERMITE_NODES)? - gaussian_entropy(1.0 + sig * sig)).abs();
    let sigma = [0.05, 0.4, 1.5];
    let kl = relative_error(&gaussian_kl_sigma_grad(&sigma, 1e4), &neg_log_sigma_grad(&sigma));
    Ok(vec![
        CheckOutcome {
            suite: s,
            name: "marginal entropy bounds the conditional entropy on 20 random actors".into(),
            passed: worst_gap <= ENTROPY_SLACK,
            detail: format!("worst bound minus entropy {worst_gap:.3e} <= {ENTROPY_SLACK:.0e}"),
        },
        outcome(s, "quadrature matches the convolved Gaussian entropy", conv, 1e-4),
        outcome(s, "KL sigma-gradient approaches the entropy gradient at tau 1e4", kl, KL_LIMIT_TOL),
    ])
}
