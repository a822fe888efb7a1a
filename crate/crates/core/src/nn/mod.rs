//! A small layer engine with hand-written backward passes.
//!
//! Each layer owns its parameter tensors. A backward pass takes the forward
//! cache plus the upstream gradient, accumulates parameter gradients into a
//! second instance of the same layer (see [`Params::zeros_like`]), and
//! returns the gradient with respect to the layer input.

mod conv;
mod dense;
mod dropout;
mod embedding;
mod lstm;
mod pool;
mod tensor;

pub use conv::{Conv1d, ConvCache};
pub use dense::{DenseHead, Linear};
pub use dropout::{Dropout, DropoutMask, Mode};
pub use embedding::{Embedding, OOV_INDEX, PAD_INDEX};
pub use lstm::{Lstm, LstmCache, LstmState};
pub use pool::{max_pool, max_pool_backward};
pub use tensor::{sigmoid, Tensor};

pub(crate) use tensor::{axpy, dot};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("token id {id} outside vocabulary of size {vocab}")]
    IndexOutOfVocab { id: usize, vocab: usize },
    #[error("sequence of length {len} is shorter than kernel size {kernel}")]
    SequenceTooShort { len: usize, kernel: usize },
    #[error("cannot pool an empty sequence")]
    EmptySequence,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

/// Uniform Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Access to a layer's (or model's) learnable tensors in a fixed order.
pub trait Params: Clone {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    /// A copy with every parameter set to zero, used as a gradient buffer.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// `[h, e]`, text representation first.
pub fn concat_features(h: &[f64], e: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(h.len() + e.len());
    z.extend_from_slice(h);
    z.extend_from_slice(e);
    z
}

/// Splits a gradient of `[h, e]` back into its two parts.
pub fn split_concat_grad(grad: &[f64], h_len: usize) -> (&[f64], &[f64]) {
    grad.split_at(h_len)
}
