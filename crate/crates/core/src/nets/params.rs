use crate::diffcore::{Ops, Tensor};
use crate::rng::{uniform_tensor, Rng};

use super::NetError;

/// Ordered, named parameter tensors of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.names.push(name.into());
        self.tensors.push(t);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Copy of `self` with values taken from `flat` (same layout as [`ParamSet::flatten`]).
    pub fn with_flat(&self, flat: &[f64]) -> ParamSet {
        assert_eq!(flat.len(), self.numel(), "flat parameter length");
        let mut out = self.clone();
        let mut at = 0;
        for t in &mut out.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        out
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect()
    }

    /// Lift every tensor into a backend as a non-differentiated constant.
    pub fn lift<O: Ops>(&self, ops: &mut O) -> Vec<O::V> {
        self.tensors.iter().map(|t| ops.constant(t.clone())).collect()
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Kaiming-uniform weights `U(-√(6/fan_in), √(6/fan_in))` for a `fan_in × fan_out` layer.
pub fn kaiming_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    uniform_tensor(rng, fan_in, fan_out, -bound, bound)
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt()
}

/// Rescale `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// `target ← tau·online + (1 − tau)·target`, elementwise.
pub fn polyak_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<(), NetError> {
    if !target.same_layout(online) {
        return Err(NetError::LayoutMismatch);
    }
    for (t, o) in target.tensors.iter_mut().zip(&online.tensors) {
        for (a, &b) in t.data_mut().iter_mut().zip(o.data()) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
    Ok(())
}
