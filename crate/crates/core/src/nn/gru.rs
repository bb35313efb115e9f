//! Gated recurrent unit with a manually derived backward pass.
//!
//! Forward recurrence per step t, with `s` the logistic function and `o`
//! elementwise multiplication:
//!
//! ```text
//! update  z_t = s(W_z x_t + U_z h_{t-1} + b_z)
//! reset   r_t = s(W_r x_t + U_r h_{t-1} + b_r)
//! cand    c_t = tanh(W_h x_t + r_t o (U_h h_{t-1}) + b_h)
//! state   h_t = z_t o h_{t-1} + (1 - z_t) o c_t
//! ```
//!
//! The backward pass walks the cached sequence in reverse, accumulating exact
//! gradients for all nine parameter blocks, the input sequence, and the
//! initial state.

use crate::error::{Error, Result};
use crate::matrix::{glorot_init, sigmoid, Matrix};
use crate::rng::Rng;

/// One-layer GRU parameters: three input projections (hidden x input), three
/// recurrent projections (hidden x hidden), three bias vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_update: Matrix,
    pub u_update: Matrix,
    pub b_update: Vec<f64>,
    pub w_reset: Matrix,
    pub u_reset: Matrix,
    pub b_reset: Vec<f64>,
    pub w_cand: Matrix,
    pub u_cand: Matrix,
    pub b_cand: Vec<f64>,
}

/// Gradients mirroring [`GruCell`] block for block.
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_update: Matrix,
    pub u_update: Matrix,
    pub b_update: Vec<f64>,
    pub w_reset: Matrix,
    pub u_reset: Matrix,
    pub b_reset: Vec<f64>,
    pub w_cand: Matrix,
    pub u_cand: Matrix,
    pub b_cand: Vec<f64>,
}

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct GruCache {
    seq: Matrix,
    h0: Vec<f64>,
    update: Matrix,
    reset: Matrix,
    /// U_cand * h_{t-1}, pre reset gate.
    rec_cand: Matrix,
    cand: Matrix,
    states: Matrix,
}

impl GruCell {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        GruCell {
            input_dim,
            hidden_dim,
            w_update: glorot_init(hidden_dim, input_dim, rng),
            u_update: glorot_init(hidden_dim, hidden_dim, rng),
            b_update: vec![0.0; hidden_dim],
            w_reset: glorot_init(hidden_dim, input_dim, rng),
            u_reset: glorot_init(hidden_dim, hidden_dim, rng),
            b_reset: vec![0.0; hidden_dim],
            w_cand: glorot_init(hidden_dim, input_dim, rng),
            u_cand: glorot_init(hidden_dim, hidden_dim, rng),
            b_cand: vec![0.0; hidden_dim],
        }
    }

    pub fn zeroed(input_dim: usize, hidden_dim: usize) -> Self {
        GruCell {
            input_dim,
            hidden_dim,
            w_update: Matrix::zeros(hidden_dim, input_dim),
            u_update: Matrix::zeros(hidden_dim, hidden_dim),
            b_update: vec![0.0; hidden_dim],
            w_reset: Matrix::zeros(hidden_dim, input_dim),
            u_reset: Matrix::zeros(hidden_dim, hidden_dim),
            b_reset: vec![0.0; hidden_dim],
            w_cand: Matrix::zeros(hidden_dim, input_dim),
            u_cand: Matrix::zeros(hidden_dim, hidden_dim),
            b_cand: vec![0.0; hidden_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        3 * (self.hidden_dim * self.input_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w_update.as_slice());
        out.extend_from_slice(self.u_update.as_slice());
        out.extend_from_slice(&self.b_update);
        out.extend_from_slice(self.w_reset.as_slice());
        out.extend_from_slice(self.u_reset.as_slice());
        out.extend_from_slice(&self.b_reset);
        out.extend_from_slice(self.w_cand.as_slice());
        out.extend_from_slice(self.u_cand.as_slice());
        out.extend_from_slice(&self.b_cand);
    }

    /// Loads parameters from the front of `src`; returns values consumed.
    pub fn load_params(&mut self, src: &[f64]) -> usize {
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&src[pos..pos + dst.len()]);
            pos += dst.len();
        };
        take(self.w_update.as_mut_slice());
        take(self.u_update.as_mut_slice());
        take(&mut self.b_update);
        take(self.w_reset.as_mut_slice());
        take(self.u_reset.as_mut_slice());
        take(&mut self.b_reset);
        take(self.w_cand.as_mut_slice());
        take(self.u_cand.as_mut_slice());
        take(&mut self.b_cand);
        pos
    }
}

impl GruGrads {
    fn zeroed(cell: &GruCell) -> Self {
        GruGrads {
            w_update: Matrix::zeros(cell.hidden_dim, cell.input_dim),
            u_update: Matrix::zeros(cell.hidden_dim, cell.hidden_dim),
            b_update: vec![0.0; cell.hidden_dim],
            w_reset: Matrix::zeros(cell.hidden_dim, cell.input_dim),
            u_reset: Matrix::zeros(cell.hidden_dim, cell.hidden_dim),
            b_reset: vec![0.0; cell.hidden_dim],
            w_cand: Matrix::zeros(cell.hidden_dim, cell.input_dim),
            u_cand: Matrix::zeros(cell.hidden_dim, cell.hidden_dim),
            b_cand: vec![0.0; cell.hidden_dim],
        }
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w_update.as_slice());
        out.extend_from_slice(self.u_update.as_slice());
        out.extend_from_slice(&self.b_update);
        out.extend_from_slice(self.w_reset.as_slice());
        out.extend_from_slice(self.u_reset.as_slice());
        out.extend_from_slice(&self.b_reset);
        out.extend_from_slice(self.w_cand.as_slice());
        out.extend_from_slice(self.u_cand.as_slice());
        out.extend_from_slice(&self.b_cand);
    }
}

impl GruCache {
    pub fn states(&self) -> &Matrix {
        &self.states
    }

    pub fn seq_len(&self) -> usize {
        self.seq.rows()
    }
}

/// Runs the recurrence over a `T x input_dim` sequence. Returns the full
/// `T x hidden_dim` state matrix and the cache for [`gru_backward`].
pub fn gru_forward(cell: &GruCell, seq: &Matrix, h0: &[f64]) -> Result<(Matrix, GruCache)> {
    let h = cell.hidden_dim;
    if seq.cols() != cell.input_dim {
        return Err(Error::shape(
            "gru_forward",
            format!("seq {}", seq.shape_string()),
            format!("input_dim {}", cell.input_dim),
        ));
    }
    if h0.len() != h {
        return Err(Error::shape(
            "gru_forward",
            format!("h0 {}", h0.len()),
            format!("hidden_dim {h}"),
        ));
    }
    let steps = seq.rows();
    let mut update = Matrix::zeros(steps, h);
    let mut reset = Matrix::zeros(steps, h);
    let mut rec_cand = Matrix::zeros(steps, h);
    let mut cand = Matrix::zeros(steps, h);
    let mut states = Matrix::zeros(steps, h);

    let mut prev = h0.to_vec();
    for t in 0..steps {
        let x = seq.row(t);
        let mut az = cell.w_update.matvec(x)?;
        let mut ar = cell.w_reset.matvec(x)?;
        let mut ac = cell.w_cand.matvec(x)?;
        let uz = cell.u_update.matvec(&prev)?;
        let ur = cell.u_reset.matvec(&prev)?;
        let uc = cell.u_cand.matvec(&prev)?;
        for i in 0..h {
            az[i] += uz[i] + cell.b_update[i];
            ar[i] += ur[i] + cell.b_reset[i];
            let z = sigmoid(az[i]);
            let r = sigmoid(ar[i]);
            ac[i] += r * uc[i] + cell.b_cand[i];
            let c = ac[i].tanh();
            let hnew = z * prev[i] + (1.0 - z) * c;
            update.set(t, i, z);
            reset.set(t, i, r);
            rec_cand.set(t, i, uc[i]);
            cand.set(t, i, c);
            states.set(t, i, hnew);
        }
        prev.copy_from_slice(states.row(t));
    }

    let cache = GruCache {
        seq: seq.clone(),
        h0: h0.to_vec(),
        update,
        reset,
        rec_cand,
        cand,
        states: states.clone(),
    };
    Ok((states, cache))
}

/// Exact gradients of [`gru_forward`] with respect to all parameter blocks,
/// the input sequence, and the initial state, given upstream gradients for
/// every hidden state.
pub fn gru_backward(
    cell: &GruCell,
    cache: &GruCache,
    grad_states: &Matrix,
) -> Result<(GruGrads, Matrix, Vec<f64>)> {
    let h = cell.hidden_dim;
    let steps = cache.seq.rows();
    if grad_states.rows() != steps || grad_states.cols() != h {
        return Err(Error::shape(
            "gru_backward",
            format!("grad_states {}", grad_states.shape_string()),
            format!("states {}x{h}", steps),
        ));
    }

    let mut grads = GruGrads::zeroed(cell);
    let mut grad_seq = Matrix::zeros(steps, cell.input_dim);
    let mut carry = vec![0.0; h];

    let mut g = vec![0.0; h];
    let mut da_z = vec![0.0; h];
    let mut da_r = vec![0.0; h];
    let mut da_c = vec![0.0; h];
    let mut d_rec = vec![0.0; h];

    for t in (0..steps).rev() {
        let prev: &[f64] = if t == 0 { &cache.h0 } else { cache.states.row(t - 1) };
        let x = cache.seq.row(t);

        for i in 0..h {
            g[i] = grad_states.get(t, i) + carry[i];
            let z = cache.update.get(t, i);
            let r = cache.reset.get(t, i);
            let c = cache.cand.get(t, i);
            let rc = cache.rec_cand.get(t, i);

            let dz = g[i] * (prev[i] - c);
            da_z[i] = dz * z * (1.0 - z);

            let dc = g[i] * (1.0 - z);
            da_c[i] = dc * (1.0 - c * c);

            let dr = da_c[i] * rc;
            da_r[i] = dr * r * (1.0 - r);

            d_rec[i] = da_c[i] * r;
        }

        accumulate_outer(&mut grads.w_update, &da_z, x);
        accumulate_outer(&mut grads.u_update, &da_z, prev);
        accumulate(&mut grads.b_update, &da_z);
        accumulate_outer(&mut grads.w_reset, &da_r, x);
        accumulate_outer(&mut grads.u_reset, &da_r, prev);
        accumulate(&mut grads.b_reset, &da_r);
        accumulate_outer(&mut grads.w_cand, &da_c, x);
        accumulate_outer(&mut grads.u_cand, &d_rec, prev);
        accumulate(&mut grads.b_cand, &da_c);

        let dx_z = cell.w_update.matvec_transposed(&da_z)?;
        let dx_r = cell.w_reset.matvec_transposed(&da_r)?;
        let dx_c = cell.w_cand.matvec_transposed(&da_c)?;
        {
            let row = grad_seq.row_mut(t);
            for i in 0..row.len() {
                row[i] = dx_z[i] + dx_r[i] + dx_c[i];
            }
        }

        let dh_z = cell.u_update.matvec_transposed(&da_z)?;
        let dh_r = cell.u_reset.matvec_transposed(&da_r)?;
        let dh_c = cell.u_cand.matvec_transposed(&d_rec)?;
        for i in 0..h {
            carry[i] = g[i] * cache.update.get(t, i) + dh_z[i] + dh_r[i] + dh_c[i];
        }
    }

    Ok((grads, grad_seq, carry))
}

fn accumulate_outer(dst: &mut Matrix, col: &[f64], row: &[f64]) {
    for (i, &c) in col.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let out = dst.row_mut(i);
        for (o, &r) in out.iter_mut().zip(row) {
            *o += c * r;
        }
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{max_rel_err, numeric_grad};

    fn random_seq(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = rng.uniform(-1.0, 1.0);
        }
        m
    }

    #[test]
    fn zero_parameters_give_zero_states() {
        let cell = GruCell::zeroed(3, 4);
        let mut rng = Rng::new(9);
        let seq = random_seq(6, 3, &mut rng);
        let (states, _) = gru_forward(&cell, &seq, &[0.0; 4]).unwrap();
        assert!(states.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_single_step_hand_value() {
        let mut cell = GruCell::zeroed(1, 1);
        cell.w_cand.set(0, 0, 1.0);
        let seq = Matrix::from_rows(&[vec![0.3]]).unwrap();
        let (states, _) = gru_forward(&cell, &seq, &[0.0]).unwrap();
        let expected = 0.5 * 0.3_f64.tanh();
        assert!((states.get(0, 0) - expected).abs() < 1e-15);
        assert!((states.get(0, 0) - 0.1457).abs() < 1e-4);
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = Rng::new(4);
        let cell = GruCell::new(3, 5, &mut rng);
        let seq = random_seq(7, 3, &mut rng);
        let h0: Vec<f64> = (0..5).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let (a, _) = gru_forward(&cell, &seq, &h0).unwrap();
        let (b, _) = gru_forward(&cell, &seq, &h0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let cell = GruCell::zeroed(3, 4);
        let seq = Matrix::zeros(5, 2);
        assert!(gru_forward(&cell, &seq, &[0.0; 4]).is_err());
        let seq = Matrix::zeros(5, 3);
        assert!(gru_forward(&cell, &seq, &[0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(8);
        let cell = GruCell::new(2, 3, &mut rng);
        let seq = random_seq(4, 2, &mut rng);
        let (_, cache) = gru_forward(&cell, &seq, &[0.0; 3]).unwrap();
        let upstream = Matrix::zeros(4, 3);
        let (grads, grad_seq, grad_h0) = gru_backward(&cell, &cache, &upstream).unwrap();
        let mut flat = Vec::new();
        grads.append_params(&mut flat);
        assert!(flat.iter().all(|&v| v == 0.0));
        assert!(grad_seq.as_slice().iter().all(|&v| v == 0.0));
        assert!(grad_h0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_upstream() {
        let mut rng = Rng::new(2);
        let cell = GruCell::new(2, 3, &mut rng);
        let seq = random_seq(4, 2, &mut rng);
        let (_, cache) = gru_forward(&cell, &seq, &[0.0; 3]).unwrap();
        let wrong_rows = Matrix::zeros(3, 3);
        assert!(gru_backward(&cell, &cache, &wrong_rows).is_err());
        let wrong_cols = Matrix::zeros(4, 2);
        assert!(gru_backward(&cell, &cache, &wrong_cols).is_err());
    }

    #[test]
    fn single_step_candidate_weight_closed_form() {
        // With all gate weights zero: z = r = 0.5, so
        // h1 = 0.5*h0 + 0.5*tanh(w*x) and dh1/dw = 0.5*(1 - tanh^2(w*x))*x.
        let mut cell = GruCell::zeroed(1, 1);
        cell.w_cand.set(0, 0, 0.7);
        let x = 0.4;
        let seq = Matrix::from_rows(&[vec![x]]).unwrap();
        let (_, cache) = gru_forward(&cell, &seq, &[0.0]).unwrap();
        let upstream = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let (grads, _, _) = gru_backward(&cell, &cache, &upstream).unwrap();
        let pre = 0.7 * x;
        let expected = 0.5 * (1.0 - pre.tanh().powi(2)) * x;
        assert!((grads.w_cand.get(0, 0) - expected).abs() < 1e-14);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let cell = GruCell::new(3, 4, &mut rng);
        let seq = random_seq(5, 3, &mut rng);
        let h0: Vec<f64> = (0..4).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let upstream = random_seq(5, 4, &mut rng);

        let (_, cache) = gru_forward(&cell, &seq, &h0).unwrap();
        let (grads, grad_seq, grad_h0) = gru_backward(&cell, &cache, &upstream).unwrap();
        let mut analytic = Vec::new();
        grads.append_params(&mut analytic);
        analytic.extend_from_slice(grad_seq.as_slice());
        analytic.extend_from_slice(&grad_h0);

        let mut flat = Vec::new();
        cell.append_params(&mut flat);
        flat.extend_from_slice(seq.as_slice());
        flat.extend_from_slice(&h0);
        let n_cell = cell.param_count();
        let n_seq = seq.as_slice().len();

        let numeric = numeric_grad(&flat, 1e-5, |p| {
            let mut c = cell.clone();
            c.load_params(&p[..n_cell]);
            let s = Matrix::from_vec(5, 3, p[n_cell..n_cell + n_seq].to_vec()).unwrap();
            let h: Vec<f64> = p[n_cell + n_seq..].to_vec();
            let (states, _) = gru_forward(&c, &s, &h).unwrap();
            states
                .as_slice()
                .iter()
                .zip(upstream.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        });

        let err = max_rel_err(&analytic, &numeric);
        assert!(err < 1e-5, "max relative error {err}");
    }
}
