//! Global max pooling over the position axis.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-channel maximum over all rows. Ties resolve to the lowest row index so
/// the backward routing is reproducible. Returns the pooled vector and the
/// winning row per channel.
pub fn global_max_pool(input: &Matrix) -> Result<(Vec<f64>, Vec<usize>)> {
    if input.rows() == 0 {
        return Err(Error::InvalidArgument("max pool over empty input".into()));
    }
    let channels = input.cols();
    let mut best = input.row(0).to_vec();
    let mut argmax = vec![0usize; channels];
    for r in 1..input.rows() {
        let row = input.row(r);
        for c in 0..channels {
            if row[c] > best[c] {
                best[c] = row[c];
                argmax[c] = r;
            }
        }
    }
    Ok((best, argmax))
}

/// Routes upstream channel gradients back to the winning rows.
pub fn global_max_pool_backward(
    input_rows: usize,
    argmax: &[usize],
    grad_out: &[f64],
) -> Result<Matrix> {
    if argmax.len() != grad_out.len() {
        return Err(Error::shape(
            "max_pool_backward",
            format!("argmax {}", argmax.len()),
            format!("grad {}", grad_out.len()),
        ));
    }
    let mut dx = Matrix::zeros(input_rows, grad_out.len());
    for (c, (&row, &g)) in argmax.iter().zip(grad_out).enumerate() {
        dx.set(row, c, g);
    }
    Ok(dx)
}
