use std::fmt::Write as _;

pub const METRICS_HEADER: &str = "env_step,grad_step,episode_return,q_term,entropy_term,md_term,critic_loss,mean_log_sigma,mean_weight,zero_weight_fraction,lr,eval_mean,eval_std";

/// One logged line. Missing values are written as empty fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRow {
    pub env_step: u64,
    pub grad_step: u64,
    pub episode_return: Option<f64>,
    pub q_term: Option<f64>,
    pub entropy_term: Option<f64>,
    pub md_term: Option<f64>,
    pub critic_loss: Option<f64>,
    pub mean_log_sigma: Option<f64>,
    pub mean_weight: Option<f64>,
    pub zero_weight_fraction: Option<f64>,
    pub lr: Option<f64>,
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
}

fn field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}", self.env_step, self.grad_step);
        for v in [
            self.episode_return,
            self.q_term,
            self.entropy_term,
            self.md_term,
            self.critic_loss,
            self.mean_log_sigma,
            self.mean_weight,
            self.zero_weight_fraction,
            self.lr,
            self.eval_mean,
            self.eval_std,
        ] {
            let _ = write!(s, ",{}", field(v));
        }
        s
    }

    pub fn from_csv(line: &str) -> Option<MetricsRow> {
        let parts: Vec<&str> = line.trim_end().split(',').collect();
        if parts.len() != 13 {
            return None;
        }
        let opt = |s: &str| -> Option<Option<f64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(MetricsRow {
            env_step: parts[0].parse().ok()?,
            grad_step: parts[1].parse().ok()?,
            episode_return: opt(parts[2])?,
            q_term: opt(parts[3])?,
            entropy_term: opt(parts[4])?,
            md_term: opt(parts[5])?,
            critic_loss: opt(parts[6])?,
            mean_log_sigma: opt(parts[7])?,
            mean_weight: opt(parts[8])?,
            zero_weight_fraction: opt(parts[9])?,
            lr: opt(parts[10])?,
            eval_mean: opt(parts[11])?,
            eval_std: opt(parts[12])?,
        })
    }
}
