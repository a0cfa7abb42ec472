//! Dense linear algebra and seeded randomness for the model and trainer.

mod matrix;
mod real;
mod rng;

pub use matrix::{
    add, concat_rows, cross_entropy, hadamard, matmul, matmul_transposed, sigmoid, sigmoid_scalar,
    softmax, sub, tanh_map, Matrix, PROB_FLOOR,
};
pub use real::Real;
pub use rng::{rng_uniform, SeededRng};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected {rows}x{cols} values, got {len}")]
    LengthMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid uniform range [{lo}, {hi})")]
    InvalidRange { lo: f64, hi: f64 },
}
