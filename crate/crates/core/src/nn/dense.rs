//! Fully connected layer: `y = W x + b` with an exact backward pass.

use crate::error::{Error, Result};
use crate::matrix::{glorot_init, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_dim x in_dim`, row-major.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        DenseLayer {
            weights: glorot_init(out_dim, in_dim, rng),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
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

    /// Sum of squared weight entries (biases excluded); used by the L2
    /// penalty, which applies to fully connected weights only.
    pub fn weight_sq_sum(&self) -> f64 {
        self.weights.as_slice().iter().map(|w| w * w).sum()
    }
}

pub fn dense_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layer.in_dim() {
        return Err(Error::shape(
            "dense_forward",
            format!("input {}", x.len()),
            format!("in_dim {}", layer.in_dim()),
        ));
    }
    let mut out = layer.weights.matvec(x)?;
    for (o, b) in out.iter_mut().zip(&layer.bias) {
        *o += b;
    }
    Ok(out)
}

/// Gradients given the input that produced the forward output and upstream
/// gradients. Returns (weight grads, bias grads, input grads).
pub fn dense_backward(
    layer: &DenseLayer,
    x: &[f64],
    grad_out: &[f64],
) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    if x.len() != layer.in_dim() || grad_out.len() != layer.out_dim() {
        return Err(Error::shape(
            "dense_backward",
            format!("input {} / grad {}", x.len(), grad_out.len()),
            format!("{}x{}", layer.out_dim(), layer.in_dim()),
        ));
    }
    let mut dw = Matrix::zeros(layer.out_dim(), layer.in_dim());
    for (o, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = dw.row_mut(o);
        for (r, &xv) in row.iter_mut().zip(x) {
            *r = g * xv;
        }
    }
    let db = grad_out.to_vec();
    let dx = layer.weights.matvec_transposed(grad_out)?;
    Ok((dw, db, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{max_rel_err, numeric_grad};

    #[test]
    fn zero_weights_return_bias() {
        let mut layer = DenseLayer::zeroed(3, 2);
        layer.bias = vec![0.5, -1.0];
        let out = dense_forward(&layer, &[9.0, 9.0, 9.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.0]);
    }

    #[test]
    fn hand_product() {
        let mut layer = DenseLayer::zeroed(2, 2);
        layer.weights = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let out = dense_forward(&layer, &[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![3.0, 7.0]);
    }

    #[test]
    fn rejects_length_mismatch() {
        let layer = DenseLayer::zeroed(3, 2);
        assert!(dense_forward(&layer, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(3);
        let layer = DenseLayer::new(4, 3, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let upstream: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();

        let (dw, db, dx) = dense_backward(&layer, &x, &upstream).unwrap();
        let mut analytic = Vec::new();
        analytic.extend_from_slice(dw.as_slice());
        analytic.extend_from_slice(&db);
        analytic.extend_from_slice(&dx);

        let mut flat = Vec::new();
        layer.append_params(&mut flat);
        flat.extend_from_slice(&x);
        let n_params = layer.param_count();

        let numeric = numeric_grad(&flat, 1e-5, |p| {
            let mut l = layer.clone();
            l.load_params(&p[..n_params]);
            let out = dense_forward(&l, &p[n_params..]).unwrap();
            out.iter().zip(&upstream).map(|(a, b)| a * b).sum()
        });
        let err = max_rel_err(&analytic, &numeric);
        assert!(err < 1e-6, "max relative error {err}");
    }
}
