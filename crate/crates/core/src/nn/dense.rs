use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, glorot_bound, sigmoid, NnError, Params, Tensor};

/// Fully connected layer `y = W x + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            weight: Tensor::uniform(&[output, input], glorot_bound(input, output), rng),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok((0..self.output_dim())
            .map(|r| dot(self.weight.row(r), x) + self.bias.data()[r])
            .collect())
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. `x`.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut Linear) -> Vec<f64> {
        let mut grad_in = vec![0.0; x.len()];
        for (r, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(grads.weight.row_mut(r), x, g);
            grads.bias.data_mut()[r] += g;
            axpy(&mut grad_in, self.weight.row(r), g);
        }
        grad_in
    }
}

impl Params for Linear {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Single-output sigmoid classifier `σ(w · z + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    pub layer: Linear,
}

impl DenseHead {
    pub fn new<R: Rng + ?Sized>(input: usize, rng: &mut R) -> Self {
        DenseHead {
            layer: Linear::new(input, 1, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer.input_dim()
    }

    /// The pre-activation logit.
    pub fn logit(&self, z: &[f64]) -> Result<f64, NnError> {
        Ok(self.layer.forward(z)?[0])
    }

    /// Probability in `(0, 1)`.
    pub fn forward(&self, z: &[f64]) -> Result<f64, NnError> {
        self.logit(z).map(sigmoid)
    }

    /// Backward from a gradient on the logit.
    pub fn backward_logit(&self, z: &[f64], grad_logit: f64, grads: &mut DenseHead) -> Vec<f64> {
        self.layer.backward(z, &[grad_logit], &mut grads.layer)
    }

    /// Backward from a gradient on the output probability.
    pub fn backward(
        &self,
        z: &[f64],
        grad_prob: f64,
        grads: &mut DenseHead,
    ) -> Result<Vec<f64>, NnError> {
        let p = self.forward(z)?;
        Ok(self.backward_logit(z, grad_prob * p * (1.0 - p), grads))
    }
}

impl Params for DenseHead {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layer.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layer.tensors_mut()
    }
}
