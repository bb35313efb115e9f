//! Valid (no padding) 1-D convolution over a sequence of feature rows.
//!
//! Input is `L x in_channels`; each output position i applies every filter to
//! the flattened window of rows i..i+kernel-1, so the output is
//! `(L - kernel + 1) x out_channels`.

use crate::error::{Error, Result};
use crate::matrix::{glorot_init, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    /// `out_channels x (in_channels * kernel_size)`; the column index is
    /// `window_row * in_channels + channel`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    input: Matrix,
}

impl Conv1dLayer {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, rng: &mut Rng) -> Self {
        Conv1dLayer {
            in_channels,
            out_channels,
            kernel_size,
            weights: glorot_init(out_channels, in_channels * kernel_size, rng),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn zeroed(in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        Conv1dLayer {
            in_channels,
            out_channels,
            kernel_size,
            weights: Matrix::zeros(out_channels, in_channels * kernel_size),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        input_len.checked_sub(self.kernel_size).map(|v| v + 1)
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size + self.out_channels
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(&self.bias);
    }

    pub fn load_params(&mut self, src: &[f64]) -> usize {
        let w = self.weights.as_mut_slice();
        w.copy_from_slice(&src[..w.len()]);
        let n = w.len();
        let b = self.bias.len();
        self.bias.copy_from_slice(&src[n..n + b]);
        n + b
    }
}

pub fn conv1d_forward(layer: &Conv1dLayer, input: &Matrix) -> Result<(Matrix, Conv1dCache)> {
    if input.cols() != layer.in_channels {
        return Err(Error::shape(
            "conv1d_forward",
            format!("input {}", input.shape_string()),
            format!("in_channels {}", layer.in_channels),
        ));
    }
    let len = input.rows();
    if len < layer.kernel_size {
        return Err(Error::InvalidArgument(format!(
            "conv1d input length {len} shorter than kernel {}",
            layer.kernel_size
        )));
    }
    let out_len = len - layer.kernel_size + 1;
    let mut out = Matrix::zeros(out_len, layer.out_channels);
    let window = layer.in_channels * layer.kernel_size;
    for i in 0..out_len {
        // The window rows are contiguous in the row-major input.
        let flat = &input.as_slice()[i * layer.in_channels..i * layer.in_channels + window];
        for c in 0..layer.out_channels {
            let w = layer.weights.row(c);
            let mut acc = layer.bias[c];
            for (wv, xv) in w.iter().zip(flat) {
                acc += wv * xv;
            }
            out.set(i, c, acc);
        }
    }
    Ok((
        out,
        Conv1dCache {
            input: input.clone(),
        },
    ))
}

/// Gradients of the convolution given upstream gradients for its output.
/// Returns (weight grads, bias grads, input grads).
pub fn conv1d_backward(
    layer: &Conv1dLayer,
    cache: &Conv1dCache,
    grad_out: &Matrix,
) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let len = cache.input.rows();
    let out_len = len - layer.kernel_size + 1;
    if grad_out.rows() != out_len || grad_out.cols() != layer.out_channels {
        return Err(Error::shape(
            "conv1d_backward",
            format!("grad_out {}", grad_out.shape_string()),
            format!("expected {out_len}x{}", layer.out_channels),
        ));
    }
    let window = layer.in_channels * layer.kernel_size;
    let mut dw = Matrix::zeros(layer.out_channels, window);
    let mut db = vec![0.0; layer.out_channels];
    let mut dx = Matrix::zeros(len, layer.in_channels);

    for i in 0..out_len {
        let flat = &cache.input.as_slice()[i * layer.in_channels..i * layer.in_channels + window];
        for (c, dbv) in db.iter_mut().enumerate() {
            let g = grad_out.get(i, c);
            if g == 0.0 {
                continue;
            }
            *dbv += g;
            let wrow = layer.weights.row(c);
            let dwrow = dw.row_mut(c);
            for j in 0..window {
                dwrow[j] += g * flat[j];
            }
            let dxflat =
                &mut dx.as_mut_slice()[i * layer.in_channels..i * layer.in_channels + window];
            for j in 0..window {
                dxflat[j] += g * wrow[j];
            }
        }
    }
    Ok((dw, db, dx))
}
