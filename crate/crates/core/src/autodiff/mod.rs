//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records each operation with its inputs in execution order.
//! [`Tape::backward`] walks the records in reverse, so every node's
//! gradient is complete before it is propagated to its inputs. Only
//! row-broadcast bias addition is supported; all other binary operations
//! need equal shapes.

pub mod check;
mod tape;
mod tensor;

pub(crate) use tape::matmul_raw;
pub use tape::{sign, Backward, ReduceKind, Tape, UnaryKind, Var};
pub use tensor::Tensor;
