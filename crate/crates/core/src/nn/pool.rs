use super::{NnError, Tensor};

/// Per-column maximum of a `[len, nf]` feature map. Also returns the row
/// that won each column (the first one on ties).
pub fn max_pool(input: &Tensor) -> Result<(Vec<f64>, Vec<usize>), NnError> {
    let (len, nf) = (input.rows(), input.row_len());
    if len == 0 {
        return Err(NnError::EmptySequence);
    }
    let mut best = input.row(0).to_vec();
    let mut arg = vec![0; nf];
    for j in 1..len {
        for (f, &v) in input.row(j).iter().enumerate() {
            if v > best[f] {
                best[f] = v;
                arg[f] = j;
            }
        }
    }
    Ok((best, arg))
}

/// Routes each pooled gradient back to its argmax row.
pub fn max_pool_backward(argmax: &[usize], grad_out: &[f64], len: usize) -> Tensor {
    let nf = argmax.len();
    let mut grad = Tensor::zeros(&[len, nf]);
    for (f, (&j, &g)) in argmax.iter().zip(grad_out).enumerate() {
        grad.data_mut()[j * nf + f] += g;
    }
    grad
}
