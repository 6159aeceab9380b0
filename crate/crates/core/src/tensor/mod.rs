//! Dense tensors with define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Tensor`] handles in
//! creation order, which is a topological order. [`Tensor::backward`] walks
//! that order in reverse once, accumulating gradients additively across
//! fan-out. Graphs are rebuilt for each forward pass.

mod array;
mod graph;

pub use array::Array;
pub use graph::{Graph, ParamId, Tensor};

pub(crate) use array::{matmul_nn, matmul_nt, matmul_tn};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("expected rank {expected}, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },
    #[error("shape {shape:?} does not hold {len} elements")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("shape {0:?} has a zero dimension")]
    ZeroDim(Vec<usize>),
    #[error("{op}: batch of {n} rows, need at least 2")]
    BatchSize { op: &'static str, n: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("{op}: empty input list")]
    Empty { op: &'static str },
    #[error("select_rows: index {index} out of range for {rows} rows")]
    RowIndex { index: usize, rows: usize },
}
