use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Params, Tensor};

pub const PAD_INDEX: usize = 0;
pub const OOV_INDEX: usize = 1;

/// Token-id lookup table of shape `[vocab, dim]`. Row 0 is padding and is
/// kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub weights: Tensor,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let mut weights = Tensor::uniform(&[vocab_size, dim], 0.05, rng);
        weights.row_mut(PAD_INDEX).fill(0.0);
        Embedding { weights }
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Row `j` of the output is table row `ids[j]`.
    pub fn forward(&self, ids: &[usize]) -> Result<Tensor, NnError> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= self.vocab_size() {
                return Err(NnError::IndexOutOfVocab {
                    id,
                    vocab: self.vocab_size(),
                });
            }
            out.extend_from_slice(self.weights.row(id));
        }
        Tensor::from_vec(&[ids.len(), dim], out)
    }

    /// Scatters `grad_out` rows into the table gradient. The padding row
    /// receives nothing.
    pub fn backward(&self, ids: &[usize], grad_out: &Tensor, grads: &mut Embedding) {
        for (j, &id) in ids.iter().enumerate() {
            if id == PAD_INDEX {
                continue;
            }
            super::axpy(grads.weights.row_mut(id), grad_out.row(j), 1.0);
        }
    }
}

impl Params for Embedding {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weights]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights]
    }
}
