use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, glorot_bound, sigmoid, NnError, Params, Tensor};

/// Single-layer LSTM returning the final state.
///
/// Gate weights are stacked along the first axis in the order input,
/// forget, cell, output: `w_input` is `[4H, in]`, `w_hidden` is `[4H, H]`,
/// `bias` is `[4H]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Activations saved by the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Activated gates `[i, f, g, o]` per step, `[T, 4H]`.
    gates: Vec<f64>,
    /// Cell states `c_0..c_T`, `[T + 1, H]`.
    cells: Vec<f64>,
    /// Hidden states `h_0..h_T`, `[T + 1, H]`.
    hiddens: Vec<f64>,
    steps: usize,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let w_input = Tensor::uniform(
            &[4 * hidden, input_dim],
            glorot_bound(input_dim, 4 * hidden),
            rng,
        );
        let w_hidden =
            Tensor::uniform(&[4 * hidden, hidden], glorot_bound(hidden, 4 * hidden), rng);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        // forget gate starts open
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm {
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape()[1]
    }

    /// Runs the recurrence from a zero state over every row of `seq`.
    pub fn forward(&self, seq: &Tensor) -> Result<(LstmState, LstmCache), NnError> {
        let (steps, hsz) = (seq.rows(), self.hidden());
        if seq.row_len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                found: seq.row_len(),
            });
        }
        if steps == 0 {
            return Err(NnError::EmptySequence);
        }
        let mut gates = vec![0.0; steps * 4 * hsz];
        let mut cells = vec![0.0; (steps + 1) * hsz];
        let mut hiddens = vec![0.0; (steps + 1) * hsz];
        let bias = self.bias.data();

        for t in 0..steps {
            let x = seq.row(t);
            let (h_done, h_rest) = hiddens.split_at_mut((t + 1) * hsz);
            let h_prev = &h_done[t * hsz..];
            let (c_done, c_rest) = cells.split_at_mut((t + 1) * hsz);
            let c_prev = &c_done[t * hsz..];
            let a = &mut gates[t * 4 * hsz..(t + 1) * 4 * hsz];

            for r in 0..4 * hsz {
                a[r] = dot(self.w_input.row(r), x) + dot(self.w_hidden.row(r), h_prev) + bias[r];
            }
            for k in 0..hsz {
                let i = sigmoid(a[k]);
                let f = sigmoid(a[hsz + k]);
                let g = a[2 * hsz + k].tanh();
                let o = sigmoid(a[3 * hsz + k]);
                a[k] = i;
                a[hsz + k] = f;
                a[2 * hsz + k] = g;
                a[3 * hsz + k] = o;
                let c = f * c_prev[k] + i * g;
                c_rest[k] = c;
                h_rest[k] = o * c.tanh();
            }
        }

        let state = LstmState {
            c: cells[steps * hsz..].to_vec(),
            h: hiddens[steps * hsz..].to_vec(),
        };
        Ok((
            state,
            LstmCache {
                gates,
                cells,
                hiddens,
                steps,
            },
        ))
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Returns the gradient with respect to `seq`.
    pub fn backward(
        &self,
        seq: &Tensor,
        cache: &LstmCache,
        grad_h: &[f64],
        grads: &mut Lstm,
    ) -> Tensor {
        let hsz = self.hidden();
        let in_dim = self.input_dim();
        let mut grad_seq = Tensor::zeros(&[cache.steps, in_dim]);
        let mut dh = grad_h.to_vec();
        let mut dc = vec![0.0; hsz];
        let mut da = vec![0.0; 4 * hsz];

        for t in (0..cache.steps).rev() {
            let gate = &cache.gates[t * 4 * hsz..(t + 1) * 4 * hsz];
            let c = &cache.cells[(t + 1) * hsz..(t + 2) * hsz];
            let c_prev = &cache.cells[t * hsz..(t + 1) * hsz];
            let h_prev = &cache.hiddens[t * hsz..(t + 1) * hsz];

            for k in 0..hsz {
                let (i, f, g, o) = (gate[k], gate[hsz + k], gate[2 * hsz + k], gate[3 * hsz + k]);
                let tc = c[k].tanh();
                let d_o = dh[k] * tc;
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                let d_i = dc[k] * g;
                let d_g = dc[k] * i;
                let d_f = dc[k] * c_prev[k];
                da[k] = d_i * i * (1.0 - i);
                da[hsz + k] = d_f * f * (1.0 - f);
                da[2 * hsz + k] = d_g * (1.0 - g * g);
                da[3 * hsz + k] = d_o * o * (1.0 - o);
                dc[k] *= f;
            }

            let x = seq.row(t);
            let dx = grad_seq.row_mut(t);
            dh.fill(0.0);
            for (r, &dar) in da.iter().enumerate() {
                if dar == 0.0 {
                    continue;
                }
                axpy(grads.w_input.row_mut(r), x, dar);
                axpy(grads.w_hidden.row_mut(r), h_prev, dar);
                grads.bias.data_mut()[r] += dar;
                axpy(dx, self.w_input.row(r), dar);
                axpy(&mut dh, self.w_hidden.row(r), dar);
            }
        }
        grad_seq
    }
}

impl Params for Lstm {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}
