//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! Expressions are built once with [`ExprBuilder`] and evaluated many times
//! against different [`Bindings`]. Trainable inputs receive gradients; every
//! other input (data, masks, labels) is treated as a constant.

mod adam;
mod expr;
mod grad;

pub use adam::{adam_step, AdamConfig, AdamState, ParamStore};
pub use expr::{
    sigmoid, softmax_rows, Bindings, Expr, ExprBuilder, Forward, Matrix, NodeId, OpKind, LEAKY_RELU_SLOPE,
};
pub use grad::{relative_error, GradCheck, Gradients, WorstEntry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch at {node}: {detail}")]
    ShapeMismatch { node: String, detail: String },
    #[error("no binding for input '{name}'")]
    MissingBinding { name: String },
    #[error("gradient requested for a non-scalar root ({rows}×{cols})")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("non-finite gradient for '{name}' at {index:?}: {value}")]
    NonFiniteGradient {
        name: String,
        index: (usize, usize),
        value: f64,
    },
    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),
}
