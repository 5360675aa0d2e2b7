//! Forward-mode tangents for Jacobian-vector products.
//!
//! Nothing here touches a [`super::Tape`]: JVP outputs only ever feed
//! stop-gradient regression targets, so second derivatives are never needed.

use super::ops::{check_finite, layer_norm_forward, layer_norm_jacobian, Binary, Ops, Unary};
use super::tensor::gemm;
use super::{DiffError, Result, Tensor};

/// A primal value with a tangent of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DualTensor {
    primal: Tensor,
    tangent: Tensor,
    // Set for constants so matmuls against weights skip a product with zeros.
    zero_tangent: bool,
}

impl DualTensor {
    pub fn new(primal: Tensor, tangent: Tensor) -> Result<Self> {
        if primal.shape() != tangent.shape() {
            return Err(DiffError::ShapeMismatch { op: "dual", lhs: primal.shape(), rhs: tangent.shape() });
        }
        Ok(DualTensor { primal, tangent, zero_tangent: false })
    }

    pub fn constant(primal: Tensor) -> Self {
        let [r, c] = primal.shape();
        DualTensor { primal, tangent: Tensor::zeros(r, c), zero_tangent: true }
    }

    pub fn primal(&self) -> &Tensor {
        &self.primal
    }

    pub fn tangent(&self) -> &Tensor {
        &self.tangent
    }

    pub fn into_parts(self) -> (Tensor, Tensor) {
        (self.primal, self.tangent)
    }

    fn checked(primal: Tensor, tangent: Tensor, zero_tangent: bool, op: &'static str) -> Result<Self> {
        Ok(DualTensor { primal: check_finite(primal, op)?, tangent: check_finite(tangent, op)?, zero_tangent })
    }
}

/// Forward-mode backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct DualOps;

impl Ops for DualOps {
    type V = DualTensor;

    fn constant(&mut self, t: Tensor) -> DualTensor {
        DualTensor::constant(t)
    }

    fn primal<'a>(&'a self, v: &'a DualTensor) -> &'a Tensor {
        &v.primal
    }

    fn unary(&mut self, x: &DualTensor, op: Unary) -> Result<DualTensor> {
        let y = x.primal.map(|v| op.value(v));
        let mut t = x.tangent.clone();
        if !x.zero_tangent {
            for ((d, &xi), &yi) in t.data_mut().iter_mut().zip(x.primal.data()).zip(y.data()) {
                *d *= op.derivative(xi, yi);
            }
        }
        DualTensor::checked(y, t, x.zero_tangent, op.name())
    }

    fn binary(&mut self, a: &DualTensor, b: &DualTensor, op: Binary) -> Result<DualTensor> {
        let y = op.apply(&a.primal, &b.primal)?;
        let zero = a.zero_tangent && b.zero_tangent;
        let shape = y.shape();
        let t = if zero {
            Tensor::zeros(shape[0], shape[1])
        } else {
            match op {
                Binary::Add | Binary::Sub => op.apply(&a.tangent, &b.tangent)?,
                Binary::Mul => {
                    // d(ab) = da*b + a*db
                    let mut t = if a.zero_tangent {
                        Tensor::zeros(shape[0], shape[1])
                    } else {
                        a.tangent.broadcast_with(&b.primal, "mul", |x, y| x * y)?.expand_to(shape)?
                    };
                    if !b.zero_tangent {
                        t.add_assign(&a.primal.broadcast_with(&b.tangent, "mul", |x, y| x * y)?.expand_to(shape)?);
                    }
                    t
                }
            }
        };
        DualTensor::checked(y, t, zero, op.name())
    }

    fn matmul(&mut self, a: &DualTensor, b: &DualTensor) -> Result<DualTensor> {
        let y = a.primal.matmul(&b.primal)?;
        let mut t = Tensor::zeros(y.rows(), y.cols());
        if !a.zero_tangent {
            gemm(&a.tangent, false, &b.primal, false, &mut t, 0.0);
        }
        if !b.zero_tangent {
            gemm(&a.primal, false, &b.tangent, false, &mut t, 1.0);
        }
        DualTensor::checked(y, t, a.zero_tangent && b.zero_tangent, "matmul")
    }

    fn affine(&mut self, x: &DualTensor, c: f64, k: f64) -> Result<DualTensor> {
        DualTensor::checked(x.primal.map(|v| c * v + k), x.tangent.scale(c), x.zero_tangent, "affine")
    }

    fn sum(&mut self, x: &DualTensor) -> Result<DualTensor> {
        DualTensor::checked(Tensor::scalar(x.primal.sum()), Tensor::scalar(x.tangent.sum()), x.zero_tangent, "sum")
    }

    fn sum_cols(&mut self, x: &DualTensor) -> Result<DualTensor> {
        DualTensor::checked(x.primal.sum_cols(), x.tangent.sum_cols(), x.zero_tangent, "sum_cols")
    }

    fn sum_rows(&mut self, x: &DualTensor) -> Result<DualTensor> {
        DualTensor::checked(x.primal.sum_rows(), x.tangent.sum_rows(), x.zero_tangent, "sum_rows")
    }

    fn concat_cols(&mut self, parts: &[&DualTensor]) -> Result<DualTensor> {
        let p: Vec<&Tensor> = parts.iter().map(|d| &d.primal).collect();
        let t: Vec<&Tensor> = parts.iter().map(|d| &d.tangent).collect();
        let zero = parts.iter().all(|d| d.zero_tangent);
        Ok(DualTensor { primal: Tensor::concat_cols(&p)?, tangent: Tensor::concat_cols(&t)?, zero_tangent: zero })
    }

    fn layer_norm(&mut self, x: &DualTensor, eps: f64) -> Result<DualTensor> {
        let (y, inv_std) = layer_norm_forward(&x.primal, eps);
        let t = if x.zero_tangent {
            Tensor::zeros(y.rows(), y.cols())
        } else {
            layer_norm_jacobian(&y, &inv_std, &x.tangent)
        };
        DualTensor::checked(y, t, x.zero_tangent, "layer_norm")
    }
}

/// Evaluate `f` at `inputs` and push `tangents` through it in one forward pass.
///
/// Returns the primal outputs and their directional derivatives `J·v`.
pub fn jvp<F>(f: F, inputs: &[Tensor], tangents: &[Tensor]) -> Result<Vec<(Tensor, Tensor)>>
where
    F: FnOnce(&mut DualOps, &[DualTensor]) -> Result<Vec<DualTensor>>,
{
    if inputs.len() != tangents.len() {
        return Err(DiffError::Invalid(format!("{} inputs but {} tangents", inputs.len(), tangents.len())));
    }
    let duals = inputs
        .iter()
        .zip(tangents)
        .map(|(x, v)| DualTensor::new(x.clone(), v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut ops = DualOps;
    let outs = f(&mut ops, &duals)?;
    Ok(outs.into_iter().map(DualTensor::into_parts).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let out = jvp(|ops, x| Ok(vec![ops.square(&x[0])?]), &[Tensor::scalar(3.0)], &[Tensor::scalar(1.0)]).unwrap();
        assert_eq!(out[0].0.item().unwrap(), 9.0);
        assert_eq!(out[0].1.item().unwrap(), 6.0);
    }

    #[test]
    fn linear_map_tangent_is_wv() {
        let w = Tensor::from_vec(3, 2, vec![1.0, -2.0, 0.5, 3.0, 2.0, 1.0]).unwrap();
        let x = Tensor::row(&[0.3, -0.7, 1.1]);
        let v = Tensor::row(&[1.0, 2.0, -1.0]);
        let w2 = w.clone();
        let out = jvp(
            move |ops, inp| {
                let wc = ops.constant(w2);
                Ok(vec![ops.matmul(&inp[0], &wc)?])
            },
            &[x.clone()],
            &[v.clone()],
        )
        .unwrap();
        assert_eq!(out[0].0, x.matmul(&w).unwrap());
        assert_eq!(out[0].1, v.matmul(&w).unwrap());
    }

    #[test]
    fn mismatched_tangent_shape_is_rejected() {
        let r = jvp(|_, x| Ok(x.to_vec()), &[Tensor::zeros(1, 2)], &[Tensor::zeros(2, 1)]);
        assert!(matches!(r, Err(DiffError::ShapeMismatch { .. })));
        let r = jvp(|_, x| Ok(x.to_vec()), &[Tensor::zeros(1, 2)], &[]);
        assert!(r.is_err());
    }

    #[test]
    fn clamp_tangent_convention() {
        let x = Tensor::row(&[-3.0, -1.0, 0.0, 2.0]);
        let v = Tensor::row(&[1.0, 1.0, 1.0, 1.0]);
        let out = jvp(|ops, i| Ok(vec![ops.clamp(&i[0], -1.0, 1.0)?]), &[x], &[v]).unwrap();
        assert_eq!(out[0].1.data(), &[0.0, 1.0, 1.0, 0.0]);
    }
}
