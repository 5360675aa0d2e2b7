use std::f64::consts::PI;

use super::NetError;

/// Linear warmup from 0 to `base`, then cosine decay to `floor_ratio · base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: u64,
    pub total: u64,
    pub floor_ratio: f64,
}

impl LrSchedule {
    /// Warmup set to `warmup_frac` of `total` steps (rounded, at least one step).
    pub fn with_warmup_fraction(base: f64, total: u64, warmup_frac: f64, floor_ratio: f64) -> Self {
        let warmup = ((total as f64 * warmup_frac).round() as u64).clamp(1, total.max(1));
        LrSchedule { base, warmup, total: total.max(1), floor_ratio }
    }

    pub fn lr_at(&self, step: u64) -> Result<f64, NetError> {
        if step > self.total {
            return Err(NetError::StepOutOfRange { step, total: self.total });
        }
        if step < self.warmup {
            return Ok(self.base * step as f64 / self.warmup as f64);
        }
        let span = self.total.saturating_sub(self.warmup);
        if span == 0 {
            return Ok(self.base * self.floor_ratio);
        }
        let progress = (step - self.warmup) as f64 / span as f64;
        let cosine = 0.5 * (1.0 + (PI * progress).cos());
        Ok(self.base * (self.floor_ratio + (1.0 - self.floor_ratio) * cosine))
    }
}
