use super::{DiffError, Result, Tensor};

/// Elementwise primitives. Each carries its value and its derivative so the
/// three backends (plain, tape, dual) share one definition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Neg,
    Relu,
    Silu,
    Tanh,
    Exp,
    Log,
    Softplus,
    Square,
    Sin,
    Cos,
    /// Clamp to `[lo, hi]`; derivative 1 on the closed interval, 0 outside.
    Clamp(f64, f64),
    /// Huber with threshold `delta`: `x²/2` inside, `delta(|x| - delta/2)` outside.
    Huber(f64),
}

impl Unary {
    pub fn name(self) -> &'static str {
        match self {
            Unary::Neg => "neg",
            Unary::Relu => "relu",
            Unary::Silu => "silu",
            Unary::Tanh => "tanh",
            Unary::Exp => "exp",
            Unary::Log => "log",
            Unary::Softplus => "softplus",
            Unary::Square => "square",
            Unary::Sin => "sin",
            Unary::Cos => "cos",
            Unary::Clamp(..) => "clamp",
            Unary::Huber(_) => "huber",
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Unary::Neg => -x,
            Unary::Relu => x.max(0.0),
            Unary::Silu => x * sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Exp => x.exp(),
            Unary::Log => x.ln(),
            Unary::Softplus => softplus(x),
            Unary::Square => x * x,
            Unary::Sin => x.sin(),
            Unary::Cos => x.cos(),
            Unary::Clamp(lo, hi) => x.clamp(lo, hi),
            Unary::Huber(d) => {
                let a = x.abs();
                if a <= d {
                    0.5 * x * x
                } else {
                    d * (a - 0.5 * d)
                }
            }
        }
    }

    /// Derivative at `x`; `y` is the already computed value `f(x)`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Neg => -1.0,
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Unary::Tanh => 1.0 - y * y,
            Unary::Exp => y,
            Unary::Log => 1.0 / x,
            Unary::Softplus => sigmoid(x),
            Unary::Square => 2.0 * x,
            Unary::Sin => x.cos(),
            Unary::Cos => -x.sin(),
            Unary::Clamp(lo, hi) => {
                if (lo..=hi).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Huber(d) => x.clamp(-d, d),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

impl Binary {
    pub fn name(self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    pub fn apply(self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        match self {
            Binary::Add => a.broadcast_with(b, "add", |x, y| x + y),
            Binary::Sub => a.broadcast_with(b, "sub", |x, y| x - y),
            Binary::Mul => a.broadcast_with(b, "mul", |x, y| x * y),
        }
    }
}

pub(crate) fn check_finite(t: Tensor, op: &'static str) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(DiffError::NonFinite { op })
    }
}

/// Row-wise layer normalisation without affine terms. Returns `(x̂, 1/σ)` per row.
pub(crate) fn layer_norm_forward(x: &Tensor, eps: f64) -> (Tensor, Vec<f64>) {
    let n = x.cols() as f64;
    let mut out = Tensor::zeros(x.rows(), x.cols());
    let mut inv = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row_slice(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + eps).sqrt();
        let dst = &mut out.data_mut()[r * x.cols()..(r + 1) * x.cols()];
        for (d, v) in dst.iter_mut().zip(row) {
            *d = (v - mean) * is;
        }
        inv.push(is);
    }
    (out, inv)
}

/// The layer-norm Jacobian applied to `d` (it is symmetric, so this serves
/// both the tangent push-forward and the adjoint pull-back).
pub(crate) fn layer_norm_jacobian(xhat: &Tensor, inv_std: &[f64], d: &Tensor) -> Tensor {
    let cols = xhat.cols();
    let n = cols as f64;
    let mut out = Tensor::zeros(xhat.rows(), cols);
    for r in 0..xhat.rows() {
        let xr = xhat.row_slice(r);
        let dr = d.row_slice(r);
        let mean_d = dr.iter().sum::<f64>() / n;
        let mean_dx = dr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / n;
        let dst = &mut out.data_mut()[r * cols..(r + 1) * cols];
        for i in 0..cols {
            dst[i] = inv_std[r] * (dr[i] - mean_d - xr[i] * mean_dx);
        }
    }
    out
}

/// A numeric backend. Networks and losses are written once against this
/// trait and evaluated plainly ([`Eval`]), on a gradient tape
/// ([`super::Tape`]) or with forward-mode tangents ([`super::DualOps`]).
pub trait Ops {
    type V: Clone;

    /// Lift a value that is not differentiated through.
    fn constant(&mut self, t: Tensor) -> Self::V;
    /// The primal value of `v`.
    fn primal<'a>(&'a self, v: &'a Self::V) -> &'a Tensor;

    fn unary(&mut self, x: &Self::V, op: Unary) -> Result<Self::V>;
    fn binary(&mut self, a: &Self::V, b: &Self::V, op: Binary) -> Result<Self::V>;
    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    /// `c * x + k`.
    fn affine(&mut self, x: &Self::V, c: f64, k: f64) -> Result<Self::V>;
    /// Sum of all entries, `1 × 1`.
    fn sum(&mut self, x: &Self::V) -> Result<Self::V>;
    /// Per-row sums, `rows × 1`.
    fn sum_cols(&mut self, x: &Self::V) -> Result<Self::V>;
    /// Per-column sums, `1 × cols`.
    fn sum_rows(&mut self, x: &Self::V) -> Result<Self::V>;
    fn concat_cols(&mut self, parts: &[&Self::V]) -> Result<Self::V>;
    fn layer_norm(&mut self, x: &Self::V, eps: f64) -> Result<Self::V>;

    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Add)
    }
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Sub)
    }
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Mul)
    }
    fn scale(&mut self, x: &Self::V, c: f64) -> Result<Self::V> {
        self.affine(x, c, 0.0)
    }
    fn neg(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Neg)
    }
    fn relu(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Relu)
    }
    fn silu(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Silu)
    }
    fn tanh(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Tanh)
    }
    fn exp(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Exp)
    }
    fn log(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Log)
    }
    fn softplus(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Softplus)
    }
    fn square(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Square)
    }
    fn sin(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Sin)
    }
    fn cos(&mut self, x: &Self::V) -> Result<Self::V> {
        self.unary(x, Unary::Cos)
    }
    fn clamp(&mut self, x: &Self::V, lo: f64, hi: f64) -> Result<Self::V> {
        self.unary(x, Unary::Clamp(lo, hi))
    }
    fn huber(&mut self, x: &Self::V, delta: f64) -> Result<Self::V> {
        self.unary(x, Unary::Huber(delta))
    }
    fn mean(&mut self, x: &Self::V) -> Result<Self::V> {
        let n = self.primal(x).len() as f64;
        let s = self.sum(x)?;
        self.scale(&s, 1.0 / n)
    }
    /// Per-row means, `rows × 1`.
    fn mean_cols(&mut self, x: &Self::V) -> Result<Self::V> {
        let n = self.primal(x).cols() as f64;
        let s = self.sum_cols(x)?;
        self.scale(&s, 1.0 / n)
    }
    /// Elementwise `min(a, b) = a - relu(a - b)`.
    fn min(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        let d = self.sub(a, b)?;
        let r = self.relu(&d)?;
        self.sub(a, &r)
    }
}

/// Plain evaluation: no tape, no tangents.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eval;

impl Ops for Eval {
    type V = Tensor;

    fn constant(&mut self, t: Tensor) -> Tensor {
        t
    }

    fn primal<'a>(&'a self, v: &'a Tensor) -> &'a Tensor {
        v
    }

    fn unary(&mut self, x: &Tensor, op: Unary) -> Result<Tensor> {
        check_finite(x.map(|v| op.value(v)), op.name())
    }

    fn binary(&mut self, a: &Tensor, b: &Tensor, op: Binary) -> Result<Tensor> {
        check_finite(op.apply(a, b)?, op.name())
    }

    fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        check_finite(a.matmul(b)?, "matmul")
    }

    fn affine(&mut self, x: &Tensor, c: f64, k: f64) -> Result<Tensor> {
        check_finite(x.map(|v| c * v + k), "affine")
    }

    fn sum(&mut self, x: &Tensor) -> Result<Tensor> {
        check_finite(Tensor::scalar(x.sum()), "sum")
    }

    fn sum_cols(&mut self, x: &Tensor) -> Result<Tensor> {
        check_finite(x.sum_cols(), "sum_cols")
    }

    fn sum_rows(&mut self, x: &Tensor) -> Result<Tensor> {
        check_finite(x.sum_rows(), "sum_rows")
    }

    fn concat_cols(&mut self, parts: &[&Tensor]) -> Result<Tensor> {
        Tensor::concat_cols(parts)
    }

    fn layer_norm(&mut self, x: &Tensor, eps: f64) -> Result<Tensor> {
        check_finite(layer_norm_forward(x, eps).0, "layer_norm")
    }
}
