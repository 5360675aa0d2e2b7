//! Flat `key = value` training configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::critic::QAgg;
use crate::policy::target_k;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("missing required config key {0:?}")]
    Missing(&'static str),
    #[error("invalid value {value:?} for config key {key:?}")]
    BadValue { key: String, value: String },
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("duplicate config key {0:?}")]
    Duplicate(String),
    #[error("config key {key:?}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Which actor the trainer optimises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActorKind {
    Smfp,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOrder {
    ActorFirst,
    CriticFirst,
}

/// Mirror-descent coefficients per benchmark task.
pub const LAMBDA_TABLE: [(&str, f64); 7] = [
    ("Hopper", 3.0),
    ("Walker2D", 3.0),
    ("HalfCheetah", 0.3),
    ("Ant", 0.3),
    ("Humanoid", 0.3),
    ("HumanoidStandup", 0.3),
    ("Swimmer", 3.0),
];

pub const DEFAULT_LAMBDA: f64 = 0.3;

pub fn lambda_for_task(task: &str) -> f64 {
    LAMBDA_TABLE.iter().find(|(n, _)| *n == task).map(|(_, l)| *l).unwrap_or(DEFAULT_LAMBDA)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    pub actor: ActorKind,
    pub seed: u64,
    /// Environment steps; one gradient step per step once warmup ends.
    pub total_steps: u64,
    pub warmup_random_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub q_agg: QAgg,
    pub normalize_q_loss: bool,
    pub gamma: f64,
    /// Multiplier on rewards written to the replay buffer.
    pub reward_scale: f64,
    pub lr: f64,
    pub lr_min_ratio: f64,
    pub lr_warmup_fraction: f64,
    pub grad_clip: f64,
    pub tau: f64,
    pub critic_hidden: Vec<usize>,
    pub critic_layer_norm: bool,
    pub actor_hidden: usize,
    pub actor_depth: usize,
    pub time_embed_dim: usize,
    pub tanh_squash: bool,
    pub log_sigma_min: f64,
    pub log_sigma_max: f64,
    pub log_sigma_init: f64,
    pub kappa_sigma: f64,
    pub alpha: f64,
    pub lambda_md: f64,
    pub time_steps: usize,
    pub k_b: usize,
    pub n_adv: usize,
    pub huber_delta: f64,
    /// Weight of the squared out-of-box excess of raw actor samples.
    pub box_penalty: f64,
    pub filter_proposals: bool,
    pub update_order: UpdateOrder,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: "gaussian_mixture_bandit".into(),
            actor: ActorKind::Smfp,
            seed: 0,
            total_steps: 1_000_000,
            warmup_random_steps: 1000,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            q_agg: QAgg::Min,
            normalize_q_loss: true,
            gamma: 0.99,
            reward_scale: 1.0,
            lr: 3e-4,
            lr_min_ratio: 0.1,
            lr_warmup_fraction: 0.01,
            grad_clip: 1.0,
            tau: 0.005,
            critic_hidden: vec![512; 4],
            critic_layer_norm: true,
            actor_hidden: 256,
            actor_depth: 3,
            time_embed_dim: 64,
            tanh_squash: false,
            log_sigma_min: -10.0,
            log_sigma_max: 2.0,
            log_sigma_init: -1.0,
            kappa_sigma: -3.0,
            alpha: 0.2,
            lambda_md: DEFAULT_LAMBDA,
            time_steps: 100,
            k_b: 8,
            n_adv: 64,
            huber_delta: 1.0,
            box_penalty: 0.0,
            filter_proposals: false,
            update_order: UpdateOrder::ActorFirst,
            eval_every: 10_000,
            eval_episodes: 10,
            log_every: 1000,
            checkpoint_every: 100_000,
        }
    }
}

const KEYS: [&str; 41] = [
    "env",
    "actor",
    "seed",
    "total_steps",
    "warmup_random_steps",
    "batch_size",
    "buffer_capacity",
    "q_agg",
    "normalize_q_loss",
    "gamma",
    "reward_scale",
    "lr",
    "lr_schedule",
    "lr_min_ratio",
    "lr_warmup_fraction",
    "grad_clip",
    "tau",
    "critic_hidden",
    "critic_layer_norm",
    "actor_hidden",
    "actor_depth",
    "time_embed_dim",
    "tanh_squash",
    "log_sigma_min",
    "log_sigma_max",
    "log_sigma_init",
    "kappa_sigma",
    "alpha",
    "lambda_md",
    "time_steps",
    "k_b",
    "n_adv",
    "huber_delta",
    "box_penalty",
    "filter_proposals",
    "update_order",
    "eval_every",
    "eval_episodes",
    "log_every",
    "checkpoint_every",
    "k_t",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "True" => Ok(true),
        "false" | "False" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: value.into() }),
    }
}

impl TrainConfig {
    /// Target-side candidate count.
    pub fn k_t(&self) -> usize {
        target_k(self.k_b)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut kv: HashMap<String, String> = HashMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax(no + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey(k.to_string()));
            }
            if kv.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate(k.to_string()));
            }
        }
        if !kv.contains_key("lambda_md") {
            return Err(ConfigError::Missing("lambda_md"));
        }
        let mut c = TrainConfig::default();
        for (k, v) in &kv {
            let v = v.as_str();
            match k.as_str() {
                "env" => c.env = v.to_string(),
                "actor" => {
                    c.actor = match v {
                        "smfp" => ActorKind::Smfp,
                        "gaussian" => ActorKind::Gaussian,
                        _ => return Err(ConfigError::BadValue { key: k.clone(), value: v.into() }),
                    }
                }
                "seed" => c.seed = parse(k, v)?,
                "total_steps" => c.total_steps = parse(k, v)?,
                "warmup_random_steps" => c.warmup_random_steps = parse(k, v)?,
                "batch_size" => c.batch_size = parse(k, v)?,
                "buffer_capacity" => c.buffer_capacity = parse(k, v)?,
                "q_agg" => c.q_agg = v.parse().map_err(|_| ConfigError::BadValue { key: k.clone(), value: v.into() })?,
                "normalize_q_loss" => c.normalize_q_loss = parse_bool(k, v)?,
                "gamma" => c.gamma = parse(k, v)?,
                "reward_scale" => c.reward_scale = parse(k, v)?,
                "lr" => c.lr = parse(k, v)?,
                "lr_schedule" => {
                    if v != "cosine_with_warmup" {
                        return Err(ConfigError::BadValue { key: k.clone(), value: v.into() });
                    }
                }
                "lr_min_ratio" => c.lr_min_ratio = parse(k, v)?,
                "lr_warmup_fraction" => c.lr_warmup_fraction = parse(k, v)?,
                "grad_clip" => c.grad_clip = parse(k, v)?,
                "tau" => c.tau = parse(k, v)?,
                "critic_hidden" => {
                    c.critic_hidden = v.split(',').map(|x| parse(k, x.trim())).collect::<Result<_, _>>()?;
                }
                "critic_layer_norm" => c.critic_layer_norm = parse_bool(k, v)?,
                "actor_hidden" => c.actor_hidden = parse(k, v)?,
                "actor_depth" => c.actor_depth = parse(k, v)?,
                "time_embed_dim" => c.time_embed_dim = parse(k, v)?,
                "tanh_squash" => c.tanh_squash = parse_bool(k, v)?,
                "log_sigma_min" => c.log_sigma_min = parse(k, v)?,
                "log_sigma_max" => c.log_sigma_max = parse(k, v)?,
                "log_sigma_init" => c.log_sigma_init = parse(k, v)?,
                "kappa_sigma" => c.kappa_sigma = parse(k, v)?,
                "alpha" => c.alpha = parse(k, v)?,
                "lambda_md" => c.lambda_md = parse(k, v)?,
                "time_steps" => c.time_steps = parse(k, v)?,
                "k_b" => c.k_b = parse(k, v)?,
                "n_adv" => c.n_adv = parse(k, v)?,
                "huber_delta" => c.huber_delta = parse(k, v)?,
                "box_penalty" => c.box_penalty = parse(k, v)?,
                "filter_proposals" => c.filter_proposals = parse_bool(k, v)?,
                "update_order" => {
                    c.update_order = match v {
                        "actor_first" => UpdateOrder::ActorFirst,
                        "critic_first" => UpdateOrder::CriticFirst,
                        _ => return Err(ConfigError::BadValue { key: k.clone(), value: v.into() }),
                    }
                }
                "eval_every" => c.eval_every = parse(k, v)?,
                "eval_episodes" => c.eval_episodes = parse(k, v)?,
                "log_every" => c.log_every = parse(k, v)?,
                "checkpoint_every" => c.checkpoint_every = parse(k, v)?,
                "k_t" => {}
                _ => unreachable!("key list checked above"),
            }
        }
        if let Some(v) = kv.get("k_t") {
            let k_t: usize = parse("k_t", v)?;
            if k_t != c.k_t() {
                return Err(ConfigError::Invalid { key: "k_t", reason: format!("must equal max(1, round(k_b / 2)) = {}", c.k_t()) });
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid { key, reason: "must be positive".into() })
            }
        };
        positive("total_steps", self.total_steps > 0)?;
        positive("batch_size", self.batch_size > 0)?;
        positive("buffer_capacity", self.buffer_capacity > 0)?;
        positive("lr", self.lr > 0.0)?;
        positive("reward_scale", self.reward_scale > 0.0)?;
        positive("lr_min_ratio", self.lr_min_ratio > 0.0)?;
        positive("grad_clip", self.grad_clip > 0.0)?;
        positive("actor_hidden", self.actor_hidden > 0)?;
        positive("actor_depth", self.actor_depth > 0)?;
        positive("time_steps", self.time_steps > 0)?;
        positive("k_b", self.k_b > 0)?;
        positive("n_adv", self.n_adv > 0)?;
        positive("huber_delta", self.huber_delta > 0.0)?;
        positive("eval_episodes", self.eval_episodes > 0)?;
        positive("critic_hidden", !self.critic_hidden.is_empty() && self.critic_hidden.iter().all(|&h| h > 0))?;
        if self.time_embed_dim == 0 || self.time_embed_dim % 2 != 0 {
            return Err(ConfigError::Invalid { key: "time_embed_dim", reason: "must be a positive even number".into() });
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::Invalid { key: "gamma", reason: "must lie in [0, 1)".into() });
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(ConfigError::Invalid { key: "tau", reason: "must lie in (0, 1]".into() });
        }
        if !(0.0..=1.0).contains(&self.lr_warmup_fraction) {
            return Err(ConfigError::Invalid { key: "lr_warmup_fraction", reason: "must lie in [0, 1]".into() });
        }
        if self.alpha < 0.0 {
            return Err(ConfigError::Invalid { key: "alpha", reason: "must be non-negative".into() });
        }
        if self.box_penalty < 0.0 {
            return Err(ConfigError::Invalid { key: "box_penalty", reason: "must be non-negative".into() });
        }
        if self.lambda_md < 0.0 {
            return Err(ConfigError::Invalid { key: "lambda_md", reason: "must be non-negative".into() });
        }
        if !(self.log_sigma_min < self.log_sigma_max) {
            return Err(ConfigError::Invalid { key: "log_sigma_min", reason: "must be below log_sigma_max".into() });
        }
        if !(self.log_sigma_min..=self.log_sigma_max).contains(&self.kappa_sigma) {
            return Err(ConfigError::Invalid { key: "kappa_sigma", reason: "must lie inside the log sigma clamp range".into() });
        }
        if self.tanh_squash {
            return Err(ConfigError::Invalid { key: "tanh_squash", reason: "only clamped actions are supported".into() });
        }
        if self.warmup_random_steps >= self.total_steps {
            return Err(ConfigError::Invalid { key: "warmup_random_steps", reason: "must be below total_steps".into() });
        }
        Ok(())
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let b = |x: bool| if x { "true" } else { "false" };
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("env", self.env.clone());
        put("actor", match self.actor {
            ActorKind::Smfp => "smfp".into(),
            ActorKind::Gaussian => "gaussian".into(),
        });
        put("seed", self.seed.to_string());
        put("total_steps", self.total_steps.to_string());
        put("warmup_random_steps", self.warmup_random_steps.to_string());
        put("batch_size", self.batch_size.to_string());
        put("buffer_capacity", self.buffer_capacity.to_string());
        put("q_agg", self.q_agg.name().into());
        put("normalize_q_loss", b(self.normalize_q_loss).into());
        put("gamma", self.gamma.to_string());
        put("reward_scale", self.reward_scale.to_string());
        put("lr", self.lr.to_string());
        put("lr_schedule", "cosine_with_warmup".into());
        put("lr_min_ratio", self.lr_min_ratio.to_string());
        put("lr_warmup_fraction", self.lr_warmup_fraction.to_string());
        put("grad_clip", self.grad_clip.to_string());
        put("tau", self.tau.to_string());
        put("critic_hidden", self.critic_hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        put("critic_layer_norm", b(self.critic_layer_norm).into());
        put("actor_hidden", self.actor_hidden.to_string());
        put("actor_depth", self.actor_depth.to_string());
        put("time_embed_dim", self.time_embed_dim.to_string());
        put("tanh_squash", b(self.tanh_squash).into());
        put("log_sigma_min", self.log_sigma_min.to_string());
        put("log_sigma_max", self.log_sigma_max.to_string());
        put("log_sigma_init", self.log_sigma_init.to_string());
        put("kappa_sigma", self.kappa_sigma.to_string());
        put("alpha", self.alpha.to_string());
        put("lambda_md", self.lambda_md.to_string());
        put("time_steps", self.time_steps.to_string());
        put("k_b", self.k_b.to_string());
        put("k_t", self.k_t().to_string());
        put("n_adv", self.n_adv.to_string());
        put("huber_delta", self.huber_delta.to_string());
        put("box_penalty", self.box_penalty.to_string());
        put("filter_proposals", b(self.filter_proposals).into());
        put("update_order", match self.update_order {
            UpdateOrder::ActorFirst => "actor_first".into(),
            UpdateOrder::CriticFirst => "critic_first".into(),
        });
        put("eval_every", self.eval_every.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("log_every", self.log_every.to_string());
        put("checkpoint_every", self.checkpoint_every.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig { lambda_md: 3.0, critic_hidden: vec![32, 16], seed: 9, ..Default::default() };
        c.update_order = UpdateOrder::CriticFirst;
        assert_eq!(TrainConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn lambda_is_required() {
        assert_eq!(TrainConfig::from_text("seed = 1\n"), Err(ConfigError::Missing("lambda_md")));
    }

    #[test]
    fn unknown_and_malformed_keys() {
        assert_eq!(TrainConfig::from_text("lambda_md = 1\nlearning_rate = 3\n"), Err(ConfigError::UnknownKey("learning_rate".into())));
        assert!(matches!(TrainConfig::from_text("lambda_md = x\n"), Err(ConfigError::BadValue { .. })));
        assert_eq!(TrainConfig::from_text("lambda_md 1\n"), Err(ConfigError::Syntax(1)));
        assert!(TrainConfig::from_text("lambda_md = 1\nk_b = 8\nk_t = 3\n").is_err());
        assert!(TrainConfig::from_text("lambda_md = 1\ntanh_squash = true\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = TrainConfig::from_text("# header\n\nlambda_md = 0.3 # inline\nseed=4\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.lambda_md, 0.3);
    }

    #[test]
    fn lambda_table_lookup() {
        assert_eq!(lambda_for_task("Hopper"), 3.0);
        assert_eq!(lambda_for_task("Ant"), 0.3);
        assert_eq!(lambda_for_task("two_goal_point_mass"), DEFAULT_LAMBDA);
    }
}
