use crate::critic::{critic_loss, CriticEnsemble};
use crate::diffcore::{Tape, Tensor, Var};
use crate::envs::{make_env, Env};
use crate::nets::{
    clip_grad_norm, ActorConfig, AdamState, Checkpoint, CriticConfig, LrSchedule, NetError, ParamSet,
};
use crate::policy::{
    actor_loss, advantage_weights, best_of_k, gaussian_actor_loss, value_baseline, ActorLossConfig, ActorLossInputs,
    GaussianActor, GaussianConfig, MdBatch, NoisePair, SmfpActor,
};
use crate::rng::{normal_tensor, stream, Rng, RngState};
use crate::{Error, Result};

use super::buffer::{Batch, ReplayBuffer, Transition};
use super::config::{ActorKind, TrainConfig, UpdateOrder};
use super::evaluate::{evaluate, Agent, EvalResult, Policy};
use super::metrics::MetricsRow;

const INIT_STREAM: u64 = 10;
const TRAIN_STREAM: u64 = 11;
const ACT_STREAM: u64 = 12;
const EVAL_SEED_OFFSET: u64 = 1 << 32;

/// `n_adv` proposals per state from the pre-update actor with their
/// aggregated online Q, per-state baseline and truncated advantage weight.
#[derive(Clone, Debug)]
pub struct Proposals {
    /// Each batch state repeated `n_adv` times consecutively.
    pub states: Tensor,
    /// Unclamped actions.
    pub raw: Tensor,
    pub q: Vec<f64>,
    pub baselines: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Proposals {
    pub fn mean_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    pub fn zero_fraction(&self) -> f64 {
        self.weights.iter().filter(|&&w| w == 0.0).count() as f64 / self.weights.len() as f64
    }
}

/// Draw and weight proposals. With `filter_k > 1` each proposal is itself
/// the best of `filter_k` candidates under the online critic.
pub fn draw_proposals(
    actor: &SmfpActor,
    critic: &CriticEnsemble,
    states: &Tensor,
    n_adv: usize,
    filter_k: usize,
    rng: &mut Rng,
) -> Result<Proposals> {
    let rep = states.repeat_rows(n_adv);
    let raw = if filter_k > 1 {
        best_of_k(actor, &rep, filter_k, rng, |s, a| critic.online_q(s, a))?.raw
    } else {
        let noise = NoisePair::draw(rng, rep.rows(), actor.action_dim());
        actor.sample_raw(&rep, &noise)?.0
    };
    let q = critic.online_q(&rep, &actor.action_box.clamp(&raw))?;
    let mut baselines = Vec::with_capacity(states.rows());
    let mut weights = Vec::with_capacity(q.len());
    for group in q.chunks(n_adv) {
        let v = value_baseline(group)?;
        baselines.push(v);
        weights.extend(advantage_weights(group, v));
    }
    Ok(Proposals { states: rep, raw, q, baselines, weights })
}

fn non_finite(e: Error, what: &'static str, step: u64) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, step },
        Error::Net(NetError::NonFiniteGrad) => Error::NonFinite { what, step },
        other => other,
    }
}

/// Full training state: networks, optimisers, buffer, generators and the
/// live environment.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: Agent,
    pub critic: CriticEnsemble,
    pub buffer: ReplayBuffer,
    env: Box<dyn Env>,
    actor_opt: AdamState,
    critic_opt: [AdamState; 2],
    schedule: LrSchedule,
    rng: Rng,
    act_rng: Rng,
    state: Vec<f64>,
    env_step: u64,
    grad_step: u64,
    running_return: f64,
    last_return: Option<f64>,
    last: MetricsRow,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut env = make_env(&cfg.env, cfg.seed)?;
        let spec = env.spec().clone();
        let mut init = stream(cfg.seed, INIT_STREAM);
        let agent = match cfg.actor {
            ActorKind::Smfp => {
                let acfg = ActorConfig {
                    hidden: cfg.actor_hidden,
                    depth: cfg.actor_depth,
                    time_embed_dim: cfg.time_embed_dim,
                    log_sigma_min: cfg.log_sigma_min,
                    log_sigma_max: cfg.log_sigma_max,
                    log_sigma_init: cfg.log_sigma_init,
                    ..ActorConfig::new(spec.state_dim, spec.action_dim)
                };
                let mut a = SmfpActor::new(acfg, spec.action_box.clone(), &mut init);
                a.kappa_sigma = cfg.kappa_sigma;
                a.alpha = cfg.alpha;
                a.lambda_md = cfg.lambda_md;
                a.time_steps = cfg.time_steps;
                a.huber_delta = cfg.huber_delta;
                a.validate()?;
                Agent::Smfp(a)
            }
            ActorKind::Gaussian => {
                let gcfg = GaussianConfig {
                    hidden: cfg.actor_hidden,
                    depth: cfg.actor_depth,
                    log_sigma_min: cfg.log_sigma_min,
                    log_sigma_max: cfg.log_sigma_max,
                    ..GaussianConfig::new(spec.state_dim, spec.action_dim)
                };
                Agent::Gaussian(GaussianActor::new(gcfg, spec.action_box.clone(), &mut init))
            }
        };
        let ccfg = CriticConfig {
            hidden: cfg.critic_hidden.clone(),
            layer_norm: cfg.critic_layer_norm,
            ..CriticConfig::new(spec.state_dim, spec.action_dim)
        };
        let mut critic = CriticEnsemble::new(ccfg, &mut init);
        critic.q_agg = cfg.q_agg;
        critic.gamma = cfg.gamma;
        critic.tau = cfg.tau;
        critic.alpha = cfg.alpha;
        critic.validate()?;
        let actor_opt = AdamState::new(actor_params(&agent));
        let critic_opt = [AdamState::new(&critic.online.q1), AdamState::new(&critic.online.q2)];
        let grad_steps = (cfg.total_steps - cfg.warmup_random_steps).max(1);
        let schedule = LrSchedule::with_warmup_fraction(cfg.lr, grad_steps, cfg.lr_warmup_fraction, cfg.lr_min_ratio);
        let state = env.reset(Some(cfg.seed));
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.buffer_capacity, spec.state_dim, spec.action_dim),
            rng: stream(cfg.seed, TRAIN_STREAM),
            act_rng: stream(cfg.seed, ACT_STREAM),
            cfg,
            agent,
            critic,
            env,
            actor_opt,
            critic_opt,
            schedule,
            state,
            env_step: 0,
            grad_step: 0,
            running_return: 0.0,
            last_return: None,
            last: MetricsRow::default(),
        })
    }

    pub fn env_step(&self) -> u64 {
        self.env_step
    }

    pub fn grad_step(&self) -> u64 {
        self.grad_step
    }

    pub fn is_finished(&self) -> bool {
        self.env_step >= self.cfg.total_steps
    }

    /// Behaviour policy: best-of-`k_b` for SMFP, a plain draw for the Gaussian arm.
    pub fn policy(&self) -> Policy<'_> {
        Policy { agent: &self.agent, critic: &self.critic, k: self.cfg.k_b }
    }

    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<EvalResult> {
        evaluate(&self.policy(), &self.cfg.env, episodes, seed)
    }

    /// One environment step with the behaviour policy (uniform during warmup).
    pub fn collect_step(&mut self) -> Result<Transition> {
        let action = if self.env_step < self.cfg.warmup_random_steps {
            self.env.spec().action_box.sample(&mut self.act_rng)
        } else {
            let policy = Policy { agent: &self.agent, critic: &self.critic, k: self.cfg.k_b };
            use super::evaluate::Behaviour;
            policy.act(&Tensor::row(&self.state), &mut self.act_rng)?.row_slice(0).to_vec()
        };
        let r = self.env.step(&action)?;
        let t = Transition {
            state: std::mem::take(&mut self.state),
            action,
            reward: r.reward * self.cfg.reward_scale,
            next_state: r.next_state.clone(),
            done: r.done,
            truncated: r.truncated,
        };
        self.buffer.push(&t)?;
        self.running_return += r.reward;
        if r.done || r.truncated {
            self.last_return = Some(self.running_return);
            self.running_return = 0.0;
            self.state = self.env.reset(None);
        } else {
            self.state = r.next_state;
        }
        self.env_step += 1;
        Ok(t)
    }

    /// One gradient step on actor and critic from a fresh minibatch.
    pub fn train_step(&mut self) -> Result<MetricsRow> {
        let step = self.grad_step;
        let lr = self.schedule.lr_at(step.min(self.schedule.total))?;
        let batch = self.buffer.sample(&mut self.rng, self.cfg.batch_size)?;
        let mut row = MetricsRow { lr: Some(lr), ..Default::default() };
        match &self.agent {
            Agent::Smfp(actor) => {
                let snapshot = actor.params.clone();
                let filter_k = if self.cfg.filter_proposals { self.cfg.k_b } else { 1 };
                let props = draw_proposals(actor, &self.critic, &batch.states, self.cfg.n_adv, filter_k, &mut self.rng)?;
                row.mean_weight = Some(props.mean_weight());
                row.zero_weight_fraction = Some(props.zero_fraction());
                let md = if self.cfg.lambda_md != 0.0 {
                    Some(MdBatch::build(&actor.cfg, &snapshot, &props.states, &props.raw, &props.weights, self.cfg.time_steps, &mut self.rng)?)
                } else {
                    None
                };
                let noise = NoisePair::draw(&mut self.rng, batch.states.rows(), actor.action_dim());
                match self.cfg.update_order {
                    UpdateOrder::ActorFirst => {
                        self.smfp_actor_update(&batch, &noise, md.as_ref(), lr, &mut row)?;
                        self.critic_update(&batch, lr, &mut row)?;
                    }
                    UpdateOrder::CriticFirst => {
                        self.critic_update(&batch, lr, &mut row)?;
                        self.smfp_actor_update(&batch, &noise, md.as_ref(), lr, &mut row)?;
                    }
                }
            }
            Agent::Gaussian(g) => {
                let eps = normal_tensor(&mut self.rng, batch.states.rows(), g.cfg.action_dim);
                match self.cfg.update_order {
                    UpdateOrder::ActorFirst => {
                        self.gaussian_actor_update(&batch, &eps, lr, &mut row)?;
                        self.critic_update(&batch, lr, &mut row)?;
                    }
                    UpdateOrder::CriticFirst => {
                        self.critic_update(&batch, lr, &mut row)?;
                        self.gaussian_actor_update(&batch, &eps, lr, &mut row)?;
                    }
                }
            }
        }
        self.critic.polyak()?;
        self.grad_step += 1;
        row.grad_step = self.grad_step;
        Ok(row)
    }

    fn smfp_actor_update(&mut self, batch: &Batch, noise: &NoisePair, md: Option<&MdBatch>, lr: f64, row: &mut MetricsRow) -> Result<()> {
        let step = self.grad_step;
        let Agent::Smfp(actor) = &mut self.agent else { unreachable!("smfp branch") };
        let hp = ActorLossConfig {
            alpha: actor.alpha,
            lambda_md: actor.lambda_md,
            kappa_sigma: actor.kappa_sigma,
            huber_delta: actor.huber_delta,
            normalize_q_loss: self.cfg.normalize_q_loss,
            q_agg: self.critic.q_agg,
            box_penalty: self.cfg.box_penalty,
        };
        let inputs = ActorLossInputs { states: &batch.states, noise, md, q_scale: None, action_box: Some(&actor.action_box) };
        let mut tape = Tape::new();
        let vars: Vec<Var> = actor.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let (loss, diag) = actor_loss(&mut tape, &actor.cfg, &vars, &self.critic.cfg, &self.critic.online, &hp, &inputs)
            .map_err(|e| non_finite(e, "actor loss", step))?;
        let mut grads = tape.backward(loss, &vars)?;
        clip_grad_norm(&mut grads, self.cfg.grad_clip);
        self.actor_opt
            .step(&mut actor.params, &grads, lr)
            .map_err(|e| non_finite(e.into(), "actor gradient", step))?;
        row.q_term = Some(diag.q_term);
        row.entropy_term = Some(diag.entropy_term);
        row.md_term = Some(diag.md_term);
        row.mean_log_sigma = Some(diag.mean_log_sigma);
        Ok(())
    }

    fn gaussian_actor_update(&mut self, batch: &Batch, eps: &Tensor, lr: f64, row: &mut MetricsRow) -> Result<()> {
        let step = self.grad_step;
        let Agent::Gaussian(g) = &mut self.agent else { unreachable!("gaussian branch") };
        let mut tape = Tape::new();
        let vars: Vec<Var> = g.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let loss = gaussian_actor_loss(
            &mut tape,
            &g.cfg,
            &vars,
            &g.action_box,
            &self.critic.cfg,
            &self.critic.online,
            self.critic.q_agg,
            self.critic.alpha,
            &batch.states,
            eps,
        )?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "actor loss", step });
        }
        let mut grads = tape.backward(loss, &vars)?;
        clip_grad_norm(&mut grads, self.cfg.grad_clip);
        self.actor_opt
            .step(&mut g.params, &grads, lr)
            .map_err(|e| non_finite(e.into(), "actor gradient", step))?;
        row.q_term = Some(value);
        Ok(())
    }

    fn critic_target(&mut self, batch: &Batch) -> Result<Tensor> {
        match &self.agent {
            Agent::Smfp(actor) => {
                self.critic.critic_target(actor, &batch.rewards, &batch.next_states, &batch.done, self.cfg.k_t(), &mut self.rng)
            }
            Agent::Gaussian(g) => {
                let eps = normal_tensor(&mut self.rng, batch.next_states.rows(), g.cfg.action_dim);
                let (a, lp) = g.sample(&batch.next_states, &eps)?;
                let q = self.critic.target_q(&batch.next_states, &a)?;
                let bracket: Vec<f64> = q.iter().zip(lp.data()).map(|(q, l)| q - self.critic.alpha * l).collect();
                Ok(self.critic.bellman(&batch.rewards, &batch.done, &bracket))
            }
        }
    }

    fn critic_update(&mut self, batch: &Batch, lr: f64, row: &mut MetricsRow) -> Result<()> {
        let step = self.grad_step;
        let target = self.critic_target(batch)?;
        let mut tape = Tape::new();
        let v1: Vec<Var> = self.critic.online.q1.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let v2: Vec<Var> = self.critic.online.q2.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let loss = critic_loss(&mut tape, &self.critic.cfg, &v1, &v2, &batch.states, &batch.actions, &target)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "critic loss", step });
        }
        let all: Vec<Var> = v1.iter().chain(&v2).copied().collect();
        let mut grads = tape.backward(loss, &all)?;
        clip_grad_norm(&mut grads, self.cfg.grad_clip);
        let g2 = grads.split_off(v1.len());
        let [o1, o2] = &mut self.critic_opt;
        o1.step(&mut self.critic.online.q1, &grads, lr).map_err(|e| non_finite(e.into(), "critic gradient", step))?;
        o2.step(&mut self.critic.online.q2, &g2, lr).map_err(|e| non_finite(e.into(), "critic gradient", step))?;
        row.critic_loss = Some(value);
        Ok(())
    }

    /// Collect one transition, update once the warmup is over and the buffer
    /// holds a batch, and return a row on logging or evaluation steps.
    pub fn step(&mut self) -> Result<Option<MetricsRow>> {
        self.collect_step()?;
        if self.env_step > self.cfg.warmup_random_steps && self.buffer.len() >= self.cfg.batch_size {
            self.last = self.train_step()?;
        }
        let n = self.env_step;
        let last = n == self.cfg.total_steps;
        let log = last || (self.cfg.log_every > 0 && n % self.cfg.log_every == 0);
        let eval = last || (self.cfg.eval_every > 0 && n % self.cfg.eval_every == 0);
        if !log && !eval {
            return Ok(None);
        }
        let mut row = MetricsRow { env_step: n, grad_step: self.grad_step, episode_return: self.last_return, ..self.last.clone() };
        if eval {
            let r = self.evaluate(self.cfg.eval_episodes, self.eval_seed())?;
            row.eval_mean = Some(r.mean);
            row.eval_std = Some(r.std);
        }
        Ok(Some(row))
    }

    fn eval_seed(&self) -> u64 {
        self.cfg.seed.wrapping_add(EVAL_SEED_OFFSET).wrapping_add(self.env_step)
    }

    /// Step until `total_steps`, passing each logged row to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&Trainer, &MetricsRow) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            if let Some(row) = self.step()? {
                sink(self, &row)?;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(self.cfg.to_text());
        c.push_params("actor", actor_params(&self.agent));
        push_adam(&mut c, "actor_opt", &self.actor_opt);
        c.push_params("critic.q1", &self.critic.online.q1);
        c.push_params("critic.q2", &self.critic.online.q2);
        c.push_params("target.q1", &self.critic.target.q1);
        c.push_params("target.q2", &self.critic.target.q2);
        push_adam(&mut c, "critic_opt1", &self.critic_opt[0]);
        push_adam(&mut c, "critic_opt2", &self.critic_opt[1]);
        for (name, cols, data) in self.buffer.columns() {
            let t = Tensor::from_vec(data.len() / cols, cols, data.to_vec()).expect("sized");
            c.push_tensor(format!("buffer.{name}"), &t);
        }
        c.push_tensor("state", &Tensor::row(&self.state));
        c.push_blob("rng", RngState::capture(&self.rng).to_bytes());
        c.push_blob("act_rng", RngState::capture(&self.act_rng).to_bytes());
        c.push_blob("env", self.env.snapshot());
        let mut counters = Vec::new();
        for v in [
            self.env_step,
            self.grad_step,
            self.buffer.cursor() as u64,
            self.buffer.len() as u64,
            self.actor_opt.step_count(),
            self.critic_opt[0].step_count(),
            self.critic_opt[1].step_count(),
            self.running_return.to_bits(),
            self.last_return.is_some() as u64,
            self.last_return.unwrap_or(0.0).to_bits(),
        ] {
            counters.extend_from_slice(&v.to_le_bytes());
        }
        c.push_blob("counters", counters);
        c.push_blob("last_row", self.last.to_csv().into_bytes());
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let cfg = TrainConfig::from_text(&c.config)?;
        let mut t = Trainer::new(cfg)?;
        let corrupt = |what: &str| Error::Net(NetError::Corrupt(what.to_string()));
        c.fill_params("actor", actor_params_mut(&mut t.agent))?;
        c.fill_params("critic.q1", &mut t.critic.online.q1)?;
        c.fill_params("critic.q2", &mut t.critic.online.q2)?;
        c.fill_params("target.q1", &mut t.critic.target.q1)?;
        c.fill_params("target.q2", &mut t.critic.target.q2)?;
        let counters: Vec<u64> =
            c.blob("counters")?.chunks(8).map(|b| u64::from_le_bytes(b.try_into().unwrap_or([0; 8]))).collect();
        if counters.len() != 10 {
            return Err(corrupt("counters"));
        }
        t.env_step = counters[0];
        t.grad_step = counters[1];
        t.actor_opt = load_adam(c, "actor_opt", actor_params(&t.agent).len(), counters[4])?;
        t.critic_opt = [
            load_adam(c, "critic_opt1", t.critic.online.q1.len(), counters[5])?,
            load_adam(c, "critic_opt2", t.critic.online.q2.len(), counters[6])?,
        ];
        t.running_return = f64::from_bits(counters[7]);
        t.last_return = (counters[8] == 1).then(|| f64::from_bits(counters[9]));
        let names = ["states", "actions", "rewards", "next_states", "done", "truncated"];
        let cols = names.iter().map(|n| c.tensor(&format!("buffer.{n}")).map(|x| x.data().to_vec())).collect::<Result<Vec<_>, _>>()?;
        t.buffer.restore(counters[2] as usize, counters[3] as usize, cols)?;
        t.state = c.tensor("state")?.data().to_vec();
        t.rng = RngState::from_bytes(c.blob("rng")?).ok_or_else(|| corrupt("rng"))?.restore();
        t.act_rng = RngState::from_bytes(c.blob("act_rng")?).ok_or_else(|| corrupt("act_rng"))?.restore();
        t.env.restore(c.blob("env")?)?;
        let last = std::str::from_utf8(c.blob("last_row")?).map_err(|_| corrupt("last_row"))?;
        t.last = MetricsRow::from_csv(last).ok_or_else(|| corrupt("last_row"))?;
        Ok(t)
    }
}

fn actor_params(agent: &Agent) -> &ParamSet {
    match agent {
        Agent::Smfp(a) => &a.params,
        Agent::Gaussian(g) => &g.params,
    }
}

fn actor_params_mut(agent: &mut Agent) -> &mut ParamSet {
    match agent {
        Agent::Smfp(a) => &mut a.params,
        Agent::Gaussian(g) => &mut g.params,
    }
}

fn push_adam(c: &mut Checkpoint, prefix: &str, opt: &AdamState) {
    let (m, v) = opt.moments();
    for (i, (m, v)) in m.iter().zip(v).enumerate() {
        c.push_tensor(format!("{prefix}.m.{i}"), m);
        c.push_tensor(format!("{prefix}.v.{i}"), v);
    }
}

fn load_adam(c: &Checkpoint, prefix: &str, n: usize, step: u64) -> Result<AdamState> {
    let mut m = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        m.push(c.tensor(&format!("{prefix}.m.{i}"))?.clone());
        v.push(c.tensor(&format!("{prefix}.v.{i}"))?.clone());
    }
    Ok(AdamState::from_parts(step, m, v))
}
