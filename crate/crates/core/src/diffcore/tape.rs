//! Reverse-mode gradients over a linear record of primitive operations.

use super::ops::{check_finite, layer_norm_forward, layer_norm_jacobian, Binary, Ops, Unary};
use super::tensor::gemm;
use super::{DiffError, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Unary(Var, Unary),
    Binary(Var, Var, Binary),
    MatMul(Var, Var),
    Affine(Var, f64),
    Sum(Var),
    SumCols(Var),
    SumRows(Var),
    Concat(Vec<Var>),
    LayerNorm { x: Var, inv_std: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    /// Registered parameter (gradients may be requested for it).
    param: bool,
    /// Some registered parameter lies upstream of this node.
    needs_grad: bool,
}

/// Append-only record of one forward computation.
///
/// Gradients are accumulated additively when a value fans out to several
/// consumers, and [`Tape::backward`] visits each node at most once in
/// reverse insertion order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register a trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value: t, param: true, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { op, value, param: false, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Gradients of the scalar `loss` with respect to each parameter in `wrt`.
    /// Parameters that do not influence the loss receive zeros.
    pub fn backward(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let root = &self.nodes[loss.0];
        if root.value.shape() != [1, 1] {
            return Err(DiffError::NotScalar(root.value.shape()));
        }
        for w in wrt {
            if !self.nodes.get(w.0).is_some_and(|n| n.param) {
                return Err(DiffError::NotRegistered(w.0));
            }
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            let shape = self.nodes[w.0].value.shape();
            let g = grads.get(w.0).and_then(Clone::clone).unwrap_or_else(|| Tensor::zeros(shape[0], shape[1]));
            out.push(check_finite(g, "backward")?);
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Unary(x, op) => {
                let xv = &self.nodes[x.0].value;
                let mut gx = g.clone();
                for ((d, &xi), &yi) in gx.data_mut().iter_mut().zip(xv.data()).zip(node.value.data()) {
                    *d *= op.derivative(xi, yi);
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Binary(a, b, op) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let (ga, gb) = match op {
                    Binary::Add => (g.clone(), g.clone()),
                    Binary::Sub => (g.clone(), g.scale(-1.0)),
                    Binary::Mul => {
                        let ga = if self.nodes[a.0].needs_grad {
                            g.broadcast_with(bv, "mul", |x, y| x * y).expect("recorded shapes")
                        } else {
                            Tensor::zeros(1, 1)
                        };
                        let gb = if self.nodes[b.0].needs_grad {
                            g.broadcast_with(av, "mul", |x, y| x * y).expect("recorded shapes")
                        } else {
                            Tensor::zeros(1, 1)
                        };
                        (ga, gb)
                    }
                };
                if self.nodes[a.0].needs_grad {
                    self.accumulate(grads, *a, ga.reduce_to(av.shape()));
                }
                if self.nodes[b.0].needs_grad {
                    self.accumulate(grads, *b, gb.reduce_to(bv.shape()));
                }
            }
            Op::MatMul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                if self.nodes[a.0].needs_grad {
                    let mut ga = Tensor::zeros(av.rows(), av.cols());
                    gemm(g, false, bv, true, &mut ga, 0.0);
                    self.accumulate(grads, *a, ga);
                }
                if self.nodes[b.0].needs_grad {
                    let mut gb = Tensor::zeros(bv.rows(), bv.cols());
                    gemm(av, true, g, false, &mut gb, 0.0);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Affine(x, c) => self.accumulate(grads, *x, g.scale(*c)),
            Op::Sum(x) => {
                let s = self.nodes[x.0].value.shape();
                self.accumulate(grads, *x, Tensor::full(s[0], s[1], g.data()[0]));
            }
            Op::SumCols(x) => {
                let s = self.nodes[x.0].value.shape();
                let expanded = g.expand_to(s).expect("recorded shapes");
                self.accumulate(grads, *x, expanded);
            }
            Op::SumRows(x) => {
                let s = self.nodes[x.0].value.shape();
                let expanded = g.expand_to(s).expect("recorded shapes");
                self.accumulate(grads, *x, expanded);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.cols();
                    if self.nodes[p.0].needs_grad {
                        self.accumulate(grads, *p, g.slice_cols(start, w));
                    }
                    start += w;
                }
            }
            Op::LayerNorm { x, inv_std } => {
                let gx = layer_norm_jacobian(&node.value, inv_std, g);
                self.accumulate(grads, *x, gx);
            }
        }
    }
}

impl Ops for Tape {
    type V = Var;

    fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value: t, param: false, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    fn primal<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        &self.nodes[v.0].value
    }

    fn unary(&mut self, x: &Var, op: Unary) -> Result<Var> {
        let y = check_finite(self.value(*x).map(|v| op.value(v)), op.name())?;
        Ok(self.push(Op::Unary(*x, op), y, &[*x]))
    }

    fn binary(&mut self, a: &Var, b: &Var, op: Binary) -> Result<Var> {
        let y = check_finite(op.apply(self.value(*a), self.value(*b))?, op.name())?;
        Ok(self.push(Op::Binary(*a, *b, op), y, &[*a, *b]))
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = check_finite(self.value(*a).matmul(self.value(*b))?, "matmul")?;
        Ok(self.push(Op::MatMul(*a, *b), y, &[*a, *b]))
    }

    fn affine(&mut self, x: &Var, c: f64, k: f64) -> Result<Var> {
        let y = check_finite(self.value(*x).map(|v| c * v + k), "affine")?;
        Ok(self.push(Op::Affine(*x, c), y, &[*x]))
    }

    fn sum(&mut self, x: &Var) -> Result<Var> {
        let y = check_finite(Tensor::scalar(self.value(*x).sum()), "sum")?;
        Ok(self.push(Op::Sum(*x), y, &[*x]))
    }

    fn sum_cols(&mut self, x: &Var) -> Result<Var> {
        let y = check_finite(self.value(*x).sum_cols(), "sum_cols")?;
        Ok(self.push(Op::SumCols(*x), y, &[*x]))
    }

    fn sum_rows(&mut self, x: &Var) -> Result<Var> {
        let y = check_finite(self.value(*x).sum_rows(), "sum_rows")?;
        Ok(self.push(Op::SumRows(*x), y, &[*x]))
    }

    fn concat_cols(&mut self, parts: &[&Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|v| self.value(**v)).collect();
        let y = Tensor::concat_cols(&values)?;
        let vars: Vec<Var> = parts.iter().map(|v| **v).collect();
        Ok(self.push(Op::Concat(vars.clone()), y, &vars))
    }

    fn layer_norm(&mut self, x: &Var, eps: f64) -> Result<Var> {
        let (y, inv_std) = layer_norm_forward(self.value(*x), eps);
        let y = check_finite(y, "layer_norm")?;
        Ok(self.push(Op::LayerNorm { x: *x, inv_std }, y, &[*x]))
    }
}
