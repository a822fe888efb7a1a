use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, glorot_bound, NnError, Params, Tensor};

/// Valid 1-D convolution over the sequence axis followed by ReLU.
///
/// `filters` has shape `[nf, kernel, dim]`; window `j` covers input rows
/// `j..j + kernel`, flattened in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub filters: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    /// Pre-activation values, `[len - kernel + 1, nf]`.
    pub pre: Tensor,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(filters: usize, kernel: usize, dim: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(kernel * dim, kernel * filters);
        Conv1d {
            filters: Tensor::uniform(&[filters, kernel, dim], bound, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn num_filters(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.filters.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache), NnError> {
        let (len, dim, kernel, nf) = (input.rows(), self.dim(), self.kernel(), self.num_filters());
        if input.row_len() != dim {
            return Err(NnError::DimensionMismatch {
                expected: dim,
                found: input.row_len(),
            });
        }
        if len < kernel {
            return Err(NnError::SequenceTooShort { len, kernel });
        }
        let out_len = len - kernel + 1;
        let window = kernel * dim;
        let x = input.data();
        let mut pre = Tensor::zeros(&[out_len, nf]);
        let mut out = Tensor::zeros(&[out_len, nf]);
        for j in 0..out_len {
            let win = &x[j * dim..j * dim + window];
            for f in 0..nf {
                let v = dot(self.filters.row(f), win) + self.bias.data()[f];
                pre.data_mut()[j * nf + f] = v;
                out.data_mut()[j * nf + f] = v.max(0.0);
            }
        }
        Ok((out, ConvCache { pre }))
    }

    /// Returns the gradient with respect to `input`.
    pub fn backward(
        &self,
        input: &Tensor,
        cache: &ConvCache,
        grad_out: &Tensor,
        grads: &mut Conv1d,
    ) -> Tensor {
        let (dim, kernel, nf) = (self.dim(), self.kernel(), self.num_filters());
        let window = kernel * dim;
        let out_len = cache.pre.rows();
        let x = input.data();
        let mut grad_in = Tensor::zeros(input.shape());
        for j in 0..out_len {
            for f in 0..nf {
                let idx = j * nf + f;
                if cache.pre.data()[idx] <= 0.0 {
                    continue;
                }
                let g = grad_out.data()[idx];
                if g == 0.0 {
                    continue;
                }
                axpy(grads.filters.row_mut(f), &x[j * dim..j * dim + window], g);
                grads.bias.data_mut()[f] += g;
                axpy(
                    &mut grad_in.data_mut()[j * dim..j * dim + window],
                    self.filters.row(f),
                    g,
                );
            }
        }
        grad_in
    }
}

impl Params for Conv1d {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.filters, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.filters, &mut self.bias]
    }
}
