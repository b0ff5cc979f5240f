//! Dense `f64` tensors, a reverse-mode tape over a fixed set of named ops,
//! a finite-difference gradient checker, Adam, and checkpoint I/O.

mod checkpoint;
mod gradcheck;
mod graph;
pub mod ops;
mod optim;
mod param;
mod tensor;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheck, DEFAULT_STEP};
pub use graph::{Gradients, Graph, Var};
pub use ops::{cross_entropy, gelu, layer_norm, masked_softmax_rows, softmax_rows, BitMatrix};
pub use optim::Adam;
pub use param::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("mask row {row} has no allowed position")]
    EmptyMaskRow { row: usize },
    #[error("row {row}: target {target} out of range for {classes} classes")]
    TargetOutOfRange {
        row: usize,
        target: usize,
        classes: usize,
    },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
