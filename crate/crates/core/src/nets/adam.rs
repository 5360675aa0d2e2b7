use crate::diffcore::Tensor;

use super::{NetError, ParamSet};

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        AdamState { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// Rebuild from saved moments (checkpoint restore).
    pub fn from_parts(step: u64, m: Vec<Tensor>, v: Vec<Tensor>) -> Self {
        AdamState { beta1: 0.9, beta2: 0.999, eps: 1e-8, step, m, v }
    }

    /// Apply one update with learning rate `lr`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor], lr: f64) -> Result<(), NetError> {
        if grads.len() != params.len() || grads.iter().zip(params.tensors()).any(|(g, p)| g.shape() != p.shape()) {
            return Err(NetError::LayoutMismatch);
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteGrad);
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, g), (m, v)) in params.tensors_mut().iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = b1 * md[i] + (1.0 - b1) * gi;
                vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi;
                let mhat = md[i] / bc1;
                let vhat = vd[i] / bc2;
                pd[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
