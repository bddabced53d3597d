//! Dense f64 tensors with explicit-tape reverse-mode differentiation and
//! an Adam optimizer.
//!
//! The primitive set is deliberately small: matrix multiply, elementwise
//! sin/cos/add/sub/mul, scalar scale, clamp to the unit interval, and a
//! full reduction to a scalar. Broadcasting is limited to scalar scale;
//! row-vector biases are expressed as `ones(B,1) @ row(1,n)` so that one
//! matmul backward rule covers them.

mod adam;
mod gemm;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use tape::{GradientMap, NodeId, Tape};
pub use tensor::{ParamId, Tensor};

use thiserror::Error;

/// Errors raised by tensor and tape primitives.
#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected a matrix, got shape {shape:?}")]
    NotAMatrix { op: &'static str, shape: Vec<usize> },
    #[error("backward requires a scalar loss node, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadLength { shape: Vec<usize>, len: usize },
    #[error("gradient for parameter {param:?} has shape {grad:?}, parameter has {param_shape:?}")]
    GradShape {
        param: ParamId,
        grad: Vec<usize>,
        param_shape: Vec<usize>,
    },
    #[error("gradient map contains {param:?} which is not among the parameters being stepped")]
    UnknownParam { param: ParamId },
}
