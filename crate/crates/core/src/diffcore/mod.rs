//! Dense `f64` matrices with three interchangeable evaluation backends:
//! plain values, a reverse-mode gradient tape and forward-mode dual numbers.

mod dual;
mod ops;
mod tape;
mod tensor;

pub use dual::{jvp, DualOps, DualTensor};
pub use ops::{sigmoid, softplus, Binary, Eval, Ops, Unary};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

/// Layer-norm variance epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: [usize; 2], rhs: [usize; 2] },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("loss must be a 1x1 scalar, got shape {0:?}")]
    NotScalar([usize; 2]),
    #[error("node {0} is not a registered parameter")]
    NotRegistered(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = DiffError> = std::result::Result<T, E>;
