//! The five end-to-end architectures: a time-series GRU baseline, two
//! embedding-fusion variants (averaged entity vector, document vector), an
//! entities-only convolutional baseline, and the convolutional fusion model.
//!
//! Parameters live in explicit layers; `flat_params`/`set_flat_params` expose
//! them as a single vector in a fixed block order (GRU, convolutions, fusion,
//! head) for the optimizer, checkpoints, and finite-difference checks.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::entity::EntityMatrix;
use crate::error::{Error, Result};
use crate::matrix::{sigmoid, Matrix};
use crate::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout_mask,
    global_max_pool, global_max_pool_backward, gru_backward, gru_forward, Conv1dCache,
    Conv1dLayer, DenseLayer, GruCache, GruCell,
};
use crate::rng::Rng;

/// Clamp applied to the output probability so downstream logs stay finite.
const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    GruBaseline,
    AveragedMultimodal,
    Doc2VecMultimodal,
    EntitiesOnly,
    ProposedCnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::GruBaseline => "gru",
            ModelKind::AveragedMultimodal => "averaged",
            ModelKind::Doc2VecMultimodal => "doc2vec",
            ModelKind::EntitiesOnly => "entities_only",
            ModelKind::ProposedCnn => "proposed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gru" => Ok(ModelKind::GruBaseline),
            "averaged" => Ok(ModelKind::AveragedMultimodal),
            "doc2vec" => Ok(ModelKind::Doc2VecMultimodal),
            "entities_only" => Ok(ModelKind::EntitiesOnly),
            "proposed" => Ok(ModelKind::ProposedCnn),
            other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn uses_gru(&self) -> bool {
        !matches!(self, ModelKind::EntitiesOnly)
    }

    pub fn uses_cnn(&self) -> bool {
        matches!(self, ModelKind::EntitiesOnly | ModelKind::ProposedCnn)
    }

    pub fn uses_fusion(&self) -> bool {
        !matches!(self, ModelKind::GruBaseline)
    }
}

/// Architecture hyperparameters. Defaults follow the reference configuration:
/// 256 GRU units, 256/512 fully connected fusion widths, three convolutions
/// with 32/64/96 filters sharing one kernel size, 0.2 dropout, 0.01 L2 on
/// fully connected weights, 100-dimensional entity embeddings padded to 128
/// rows, 24 hourly steps of 104 features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub seq_len: usize,
    pub hidden_dim: usize,
    pub fc_dim_baseline: usize,
    pub fc_dim_proposed: usize,
    pub conv_filters: [usize; 3],
    pub kernel_size: usize,
    pub dropout: f64,
    pub l2_scale: f64,
    pub embed_dim: usize,
    pub k_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 104,
            seq_len: 24,
            hidden_dim: 256,
            fc_dim_baseline: 256,
            fc_dim_proposed: 512,
            conv_filters: [32, 64, 96],
            kernel_size: 3,
            dropout: 0.2,
            l2_scale: 0.01,
            embed_dim: 100,
            k_max: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.seq_len == 0
            || self.hidden_dim == 0
            || self.fc_dim_baseline == 0
            || self.fc_dim_proposed == 0
            || self.kernel_size == 0
            || self.embed_dim == 0
            || self.k_max == 0
            || self.conv_filters.contains(&0)
        {
            return Err(Error::InvalidArgument(
                "all model dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.l2_scale < 0.0 {
            return Err(Error::InvalidArgument("l2_scale must be nonnegative".into()));
        }
        Ok(())
    }

    /// Lengths after each valid convolution over a `k_max`-row input.
    pub fn conv_chain_lengths(&self) -> Vec<isize> {
        let mut lengths = Vec::with_capacity(3);
        let mut len = self.k_max as isize;
        for _ in 0..3 {
            len = len - self.kernel_size as isize + 1;
            lengths.push(len);
        }
        lengths
    }
}

/// Whether dropout is sampled (training) or skipped (inference).
pub enum Phase<'r> {
    Train(&'r mut Rng),
    Eval,
}

/// Per-example inputs; each architecture reads the pieces it needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelInput<'a> {
    pub timeseries: Option<&'a Matrix>,
    pub avg_entity: Option<&'a [f64]>,
    pub doc_vector: Option<&'a [f64]>,
    pub entities: Option<&'a EntityMatrix>,
}

/// Forward result plus everything the backward pass needs.
pub struct ForwardPass {
    pub prob: f64,
    logit: f64,
    gru_cache: Option<GruCache>,
    h_last: Vec<f64>,
    conv_caches: Vec<Conv1dCache>,
    conv_pre: Vec<Matrix>,
    pooled: Vec<f64>,
    pool_argmax: Vec<usize>,
    pool_rows: usize,
    fusion_in: Vec<f64>,
    fc_pre: Vec<f64>,
    dropout: Vec<f64>,
    head_in: Vec<f64>,
}

impl ForwardPass {
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    pub fn fusion_input_len(&self) -> usize {
        self.fusion_in.len()
    }

    /// Smallest gap between a channel's pooled maximum and its runner-up.
    /// Finite-difference checks need this comfortably above the probe step,
    /// otherwise the argmax flips between the two evaluations and the
    /// two-sided slope straddles a kink.
    pub fn pool_margin(&self) -> f64 {
        let Some(last_pre) = self.conv_pre.last() else {
            return f64::INFINITY;
        };
        if last_pre.rows() < 2 {
            return f64::INFINITY;
        }
        let mut margin = f64::INFINITY;
        for c in 0..last_pre.cols() {
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for r in 0..last_pre.rows() {
                let v = last_pre.get(r, c).max(0.0);
                if v > best {
                    second = best;
                    best = v;
                } else if v > second {
                    second = v;
                }
            }
            margin = margin.min(best - second);
        }
        margin
    }

    /// Smallest distance of any rectifier pre-activation from zero, over the
    /// convolution stack and the fusion layer. The other kink a
    /// finite-difference probe can straddle.
    pub fn relu_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for pre in &self.conv_pre {
            for &v in pre.as_slice() {
                margin = margin.min(v.abs());
            }
        }
        for &v in &self.fc_pre {
            margin = margin.min(v.abs());
        }
        margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    cfg: ModelConfig,
    gru: Option<GruCell>,
    convs: Vec<Conv1dLayer>,
    fusion: Option<DenseLayer>,
    head: DenseLayer,
}

/// Allocates and Glorot-initializes a model. Parameter count is a pure
/// function of the configuration.
pub fn build(kind: ModelKind, cfg: &ModelConfig, rng: &mut Rng) -> Result<Model> {
    cfg.validate()?;
    if kind.uses_cnn() {
        let lengths = cfg.conv_chain_lengths();
        if lengths.iter().any(|&l| l < 1) {
            return Err(Error::InvalidArgument(format!(
                "convolution chain collapses: k_max {} with kernel {} gives lengths {:?}",
                cfg.k_max, cfg.kernel_size, lengths
            )));
        }
    }

    let gru = kind
        .uses_gru()
        .then(|| GruCell::new(cfg.input_dim, cfg.hidden_dim, rng));

    let convs = if kind.uses_cnn() {
        let mut layers = Vec::with_capacity(3);
        let mut in_ch = cfg.embed_dim;
        for &out_ch in &cfg.conv_filters {
            layers.push(Conv1dLayer::new(in_ch, out_ch, cfg.kernel_size, rng));
            in_ch = out_ch;
        }
        layers
    } else {
        Vec::new()
    };

    let fusion = match kind {
        ModelKind::GruBaseline => None,
        ModelKind::AveragedMultimodal | ModelKind::Doc2VecMultimodal => Some(DenseLayer::new(
            cfg.hidden_dim + cfg.embed_dim,
            cfg.fc_dim_baseline,
            rng,
        )),
        ModelKind::EntitiesOnly => {
            Some(DenseLayer::new(cfg.conv_filters[2], cfg.fc_dim_proposed, rng))
        }
        ModelKind::ProposedCnn => Some(DenseLayer::new(
            cfg.hidden_dim + cfg.conv_filters[2],
            cfg.fc_dim_proposed,
            rng,
        )),
    };

    let head_in = match &fusion {
        Some(f) => f.out_dim(),
        None => cfg.hidden_dim,
    };
    let head = DenseLayer::new(head_in, 1, rng);

    Ok(Model {
        kind,
        cfg: cfg.clone(),
        gru,
        convs,
        fusion,
        head,
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.head.param_count();
        if let Some(g) = &self.gru {
            n += g.param_count();
        }
        for c in &self.convs {
            n += c.param_count();
        }
        if let Some(f) = &self.fusion {
            n += f.param_count();
        }
        n
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        if let Some(g) = &self.gru {
            g.append_params(&mut out);
        }
        for c in &self.convs {
            c.append_params(&mut out);
        }
        if let Some(f) = &self.fusion {
            f.append_params(&mut out);
        }
        self.head.append_params(&mut out);
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(
                "set_flat_params",
                format!("{}", params.len()),
                format!("{}", self.param_count()),
            ));
        }
        let mut pos = 0;
        if let Some(g) = &mut self.gru {
            pos += g.load_params(&params[pos..]);
        }
        for c in &mut self.convs {
            pos += c.load_params(&params[pos..]);
        }
        if let Some(f) = &mut self.fusion {
            pos += f.load_params(&params[pos..]);
        }
        pos += self.head.load_params(&params[pos..]);
        debug_assert_eq!(pos, params.len());
        Ok(())
    }

    /// Sum of squared fully connected weights (fusion and head; biases and
    /// GRU/convolution kernels excluded). This is the block the L2 penalty
    /// covers.
    pub fn dense_weight_sq_sum(&self) -> f64 {
        let mut s = self.head.weight_sq_sum();
        if let Some(f) = &self.fusion {
            s += f.weight_sq_sum();
        }
        s
    }

    /// Adds `2 * l2 * w` to the gradient entries of the L2-penalized weights.
    pub fn add_l2_grads(&self, l2_scale: f64, grads: &mut [f64]) {
        if l2_scale == 0.0 {
            return;
        }
        let mut offset = 0;
        if let Some(g) = &self.gru {
            offset += g.param_count();
        }
        for c in &self.convs {
            offset += c.param_count();
        }
        if let Some(f) = &self.fusion {
            let w = f.weights.as_slice();
            for (g, &wv) in grads[offset..offset + w.len()].iter_mut().zip(w) {
                *g += 2.0 * l2_scale * wv;
            }
            offset += f.param_count();
        }
        let w = self.head.weights.as_slice();
        for (g, &wv) in grads[offset..offset + w.len()].iter_mut().zip(w) {
            *g += 2.0 * l2_scale * wv;
        }
    }

    pub fn forward(&self, input: &ModelInput, phase: Phase) -> Result<ForwardPass> {
        let mut pass = ForwardPass {
            prob: 0.0,
            logit: 0.0,
            gru_cache: None,
            h_last: Vec::new(),
            conv_caches: Vec::new(),
            conv_pre: Vec::new(),
            pooled: Vec::new(),
            pool_argmax: Vec::new(),
            pool_rows: 0,
            fusion_in: Vec::new(),
            fc_pre: Vec::new(),
            dropout: Vec::new(),
            head_in: Vec::new(),
        };

        if let Some(gru) = &self.gru {
            let ts = input
                .timeseries
                .ok_or_else(|| Error::InvalidArgument("model requires a time series".into()))?;
            if ts.rows() != self.cfg.seq_len || ts.cols() != self.cfg.input_dim {
                return Err(Error::shape(
                    "model_forward",
                    format!("timeseries {}", ts.shape_string()),
                    format!("{}x{}", self.cfg.seq_len, self.cfg.input_dim),
                ));
            }
            let h0 = vec![0.0; self.cfg.hidden_dim];
            let (states, cache) = gru_forward(gru, ts, &h0)?;
            pass.h_last = states.row(states.rows() - 1).to_vec();
            pass.gru_cache = Some(cache);
        }

        if self.kind.uses_cnn() {
            let matrix = input
                .entities
                .ok_or_else(|| Error::InvalidArgument("model requires an entity matrix".into()))?;
            if matrix.k_max() != self.cfg.k_max || matrix.dim() != self.cfg.embed_dim {
                return Err(Error::shape(
                    "model_forward",
                    format!("entity matrix {}x{}", matrix.k_max(), matrix.dim()),
                    format!("{}x{}", self.cfg.k_max, self.cfg.embed_dim),
                ));
            }
            let mut current = matrix.values.clone();
            for conv in &self.convs {
                let (pre, cache) = conv1d_forward(conv, &current)?;
                current = pre.map(|v| if v > 0.0 { v } else { 0.0 });
                pass.conv_caches.push(cache);
                pass.conv_pre.push(pre);
            }
            let (pooled, argmax) = global_max_pool(&current)?;
            pass.pool_rows = current.rows();
            pass.pooled = pooled;
            pass.pool_argmax = argmax;
        }

        // Assemble the head input per architecture.
        match self.kind {
            ModelKind::GruBaseline => {
                pass.head_in = pass.h_last.clone();
            }
            ModelKind::AveragedMultimodal | ModelKind::Doc2VecMultimodal => {
                let extra = match self.kind {
                    ModelKind::AveragedMultimodal => input.avg_entity.ok_or_else(|| {
                        Error::InvalidArgument("model requires an averaged entity vector".into())
                    })?,
                    _ => input.doc_vector.ok_or_else(|| {
                        Error::InvalidArgument("model requires a document vector".into())
                    })?,
                };
                if extra.len() != self.cfg.embed_dim {
                    return Err(Error::shape(
                        "model_forward",
                        format!("entity vector {}", extra.len()),
                        format!("embed_dim {}", self.cfg.embed_dim),
                    ));
                }
                pass.fusion_in = [pass.h_last.as_slice(), extra].concat();
                self.fused_head(&mut pass, phase)?;
            }
            ModelKind::EntitiesOnly => {
                pass.fusion_in = pass.pooled.clone();
                self.fused_head(&mut pass, phase)?;
            }
            ModelKind::ProposedCnn => {
                pass.fusion_in = [pass.h_last.as_slice(), pass.pooled.as_slice()].concat();
                self.fused_head(&mut pass, phase)?;
            }
        }

        pass.logit = dense_forward(&self.head, &pass.head_in)?[0];
        pass.prob = sigmoid(pass.logit).clamp(PROB_EPS, 1.0 - PROB_EPS);
        Ok(pass)
    }

    fn fused_head(&self, pass: &mut ForwardPass, phase: Phase) -> Result<()> {
        let fusion = self.fusion.as_ref().expect("fused kinds have a fusion layer");
        pass.fc_pre = dense_forward(fusion, &pass.fusion_in)?;
        let relu: Vec<f64> = pass.fc_pre.iter().map(|&v| v.max(0.0)).collect();
        pass.dropout = match phase {
            Phase::Train(rng) => dropout_mask(self.cfg.dropout, relu.len(), rng, true)?,
            Phase::Eval => vec![1.0; relu.len()],
        };
        pass.head_in = relu
            .iter()
            .zip(&pass.dropout)
            .map(|(v, m)| v * m)
            .collect();
        Ok(())
    }

    /// Gradient of the output probability: chains through the sigmoid and
    /// delegates to [`Model::backward_logit`].
    pub fn backward(&self, pass: &ForwardPass, d_prob: f64) -> Result<Vec<f64>> {
        let d_logit = d_prob * pass.prob * (1.0 - pass.prob);
        self.backward_logit(pass, d_logit)
    }

    /// Gradients of all parameters given the upstream gradient of the
    /// pre-sigmoid logit, in `flat_params` order.
    pub fn backward_logit(&self, pass: &ForwardPass, d_logit: f64) -> Result<Vec<f64>> {
        let (head_dw, head_db, d_head_in) =
            dense_backward(&self.head, &pass.head_in, &[d_logit])?;

        let mut gru_flat: Vec<f64> = Vec::new();
        let mut conv_flat: Vec<f64> = Vec::new();
        let mut fusion_flat: Vec<f64> = Vec::new();

        if self.kind.uses_fusion() {
            let fusion = self.fusion.as_ref().expect("fusion layer present");
            // Head input was relu(fc_pre) * mask.
            let d_fc_pre: Vec<f64> = d_head_in
                .iter()
                .zip(&pass.dropout)
                .zip(&pass.fc_pre)
                .map(|((d, m), pre)| if *pre > 0.0 { d * m } else { 0.0 })
                .collect();
            let (fus_dw, fus_db, d_fusion_in) =
                dense_backward(fusion, &pass.fusion_in, &d_fc_pre)?;
            fus_dw.as_slice().clone_into(&mut fusion_flat);
            fusion_flat.extend_from_slice(&fus_db);

            let (d_hidden, d_pooled): (&[f64], &[f64]) = match self.kind {
                ModelKind::AveragedMultimodal | ModelKind::Doc2VecMultimodal => {
                    let h = self.cfg.hidden_dim;
                    (&d_fusion_in[..h], &[])
                }
                ModelKind::EntitiesOnly => (&[], &d_fusion_in[..]),
                ModelKind::ProposedCnn => {
                    let h = self.cfg.hidden_dim;
                    (&d_fusion_in[..h], &d_fusion_in[h..])
                }
                ModelKind::GruBaseline => unreachable!(),
            };

            if !d_pooled.is_empty() {
                conv_flat = self.backward_conv_stack(pass, d_pooled)?;
            } else if self.kind.uses_cnn() {
                conv_flat = vec![0.0; self.convs.iter().map(|c| c.param_count()).sum()];
            }
            if !d_hidden.is_empty() {
                gru_flat = self.backward_gru(pass, d_hidden)?;
            }
        } else {
            gru_flat = self.backward_gru(pass, &d_head_in)?;
        }

        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&gru_flat);
        out.extend_from_slice(&conv_flat);
        out.extend_from_slice(&fusion_flat);
        out.extend_from_slice(head_dw.as_slice());
        out.extend_from_slice(&head_db);
        debug_assert_eq!(out.len(), self.param_count());
        Ok(out)
    }

    fn backward_gru(&self, pass: &ForwardPass, d_h_last: &[f64]) -> Result<Vec<f64>> {
        let gru = self.gru.as_ref().expect("gru present");
        let cache = pass.gru_cache.as_ref().expect("gru cache present");
        let steps = cache.seq_len();
        let mut grad_states = Matrix::zeros(steps, self.cfg.hidden_dim);
        grad_states.row_mut(steps - 1).copy_from_slice(d_h_last);
        let (grads, _, _) = gru_backward(gru, cache, &grad_states)?;
        let mut flat = Vec::new();
        grads.append_params(&mut flat);
        Ok(flat)
    }

    fn backward_conv_stack(&self, pass: &ForwardPass, d_pooled: &[f64]) -> Result<Vec<f64>> {
        let mut d_out = global_max_pool_backward(pass.pool_rows, &pass.pool_argmax, d_pooled)?;
        let mut per_layer: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(self.convs.len());
        for (idx, conv) in self.convs.iter().enumerate().rev() {
            // d_out is relative to relu(pre); gate it by the sign of pre.
            let pre = &pass.conv_pre[idx];
            let mut d_pre = d_out.clone();
            for (d, &p) in d_pre.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if p <= 0.0 {
                    *d = 0.0;
                }
            }
            let (dw, db, dx) = conv1d_backward(conv, &pass.conv_caches[idx], &d_pre)?;
            per_layer.push((dw, db));
            d_out = dx;
        }
        per_layer.reverse();
        let mut flat = Vec::new();
        for (dw, db) in per_layer {
            flat.extend_from_slice(dw.as_slice());
            flat.extend_from_slice(&db);
        }
        Ok(flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::EntityMatrix;
    use crate::gradcheck::{max_rel_err, numeric_grad};

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 3,
            seq_len: 5,
            hidden_dim: 4,
            fc_dim_baseline: 6,
            fc_dim_proposed: 7,
            conv_filters: [2, 3, 4],
            kernel_size: 3,
            dropout: 0.0,
            l2_scale: 0.0,
            embed_dim: 5,
            k_max: 8,
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = rng.uniform(-1.0, 1.0);
        }
        m
    }

    fn random_entities(k_max: usize, dim: usize, k: usize, rng: &mut Rng) -> EntityMatrix {
        let mut values = Matrix::zeros(k_max, dim);
        let mut mask = vec![false; k_max];
        for (r, m) in mask.iter_mut().enumerate().take(k) {
            for c in 0..dim {
                values.set(r, c, rng.uniform(-1.0, 1.0));
            }
            *m = true;
        }
        EntityMatrix { values, mask, k }
    }

    struct Fixture {
        ts: Matrix,
        avg: Vec<f64>,
        doc: Vec<f64>,
        ents: EntityMatrix,
    }

    fn fixture(cfg: &ModelConfig, rng: &mut Rng) -> Fixture {
        // A fully populated entity matrix: zero-padded rows produce exact
        // ties under max pooling, which finite differences cannot straddle.
        Fixture {
            ts: random_matrix(cfg.seq_len, cfg.input_dim, rng),
            avg: (0..cfg.embed_dim).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            doc: (0..cfg.embed_dim).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            ents: random_entities(cfg.k_max, cfg.embed_dim, cfg.k_max, rng),
        }
    }

    fn input<'a>(fx: &'a Fixture) -> ModelInput<'a> {
        ModelInput {
            timeseries: Some(&fx.ts),
            avg_entity: Some(&fx.avg),
            doc_vector: Some(&fx.doc),
            entities: Some(&fx.ents),
        }
    }

    const ALL_KINDS: [ModelKind; 5] = [
        ModelKind::GruBaseline,
        ModelKind::AveragedMultimodal,
        ModelKind::Doc2VecMultimodal,
        ModelKind::EntitiesOnly,
        ModelKind::ProposedCnn,
    ];

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(3);
        let fx = fixture(&cfg, &mut rng);
        for kind in ALL_KINDS {
            let model = build(kind, &cfg, &mut rng).unwrap();
            let pass = model.forward(&input(&fx), Phase::Eval).unwrap();
            assert!(pass.prob > 0.0 && pass.prob < 1.0, "{kind:?} -> {}", pass.prob);
        }
    }

    #[test]
    fn zero_parameter_baseline_outputs_half() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(4);
        let mut model = build(ModelKind::GruBaseline, &cfg, &mut rng).unwrap();
        model.set_flat_params(&vec![0.0; model.param_count()]).unwrap();
        let fx = fixture(&cfg, &mut rng);
        let pass = model.forward(&input(&fx), Phase::Eval).unwrap();
        assert_eq!(pass.prob, 0.5);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let cfg = tiny_cfg();
        for kind in ALL_KINDS {
            let a = build(kind, &cfg, &mut Rng::new(11)).unwrap();
            let b = build(kind, &cfg, &mut Rng::new(11)).unwrap();
            assert_eq!(a.flat_params(), b.flat_params());
        }
    }

    #[test]
    fn forward_is_deterministic_in_eval() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(5);
        let fx = fixture(&cfg, &mut rng);
        for kind in ALL_KINDS {
            let model = build(kind, &cfg, &mut rng).unwrap();
            let a = model.forward(&input(&fx), Phase::Eval).unwrap();
            let b = model.forward(&input(&fx), Phase::Eval).unwrap();
            assert_eq!(a.prob, b.prob);
        }
    }

    #[test]
    fn rejects_impossible_conv_chain() {
        let mut cfg = tiny_cfg();
        cfg.k_max = 4;
        cfg.kernel_size = 3;
        let err = build(ModelKind::ProposedCnn, &cfg, &mut Rng::new(1))
            .unwrap_err()
            .to_string();
        assert!(err.contains("lengths"), "{err}");
        // 4 -> 2 -> 0 -> -2: reported chain makes the failure obvious.
        assert!(err.contains("0"), "{err}");
    }

    #[test]
    fn fusion_and_pooled_lengths_match_reference_config() {
        let cfg = ModelConfig {
            input_dim: 10,
            ..Default::default()
        };
        let mut rng = Rng::new(1);
        let model = build(ModelKind::ProposedCnn, &cfg, &mut rng).unwrap();
        let mut fx_rng = Rng::new(2);
        let fx = fixture(&cfg, &mut fx_rng);
        let pass = model.forward(&input(&fx), Phase::Eval).unwrap();
        assert_eq!(pass.pooled().len(), 96);
        assert_eq!(pass.fusion_input_len(), 256 + 96);
        assert_eq!(cfg.conv_chain_lengths(), vec![126, 124, 122]);
    }

    #[test]
    fn averaged_fusion_length_at_reference_config() {
        let cfg = ModelConfig {
            input_dim: 10,
            ..Default::default()
        };
        let mut rng = Rng::new(2);
        let model = build(ModelKind::AveragedMultimodal, &cfg, &mut rng).unwrap();
        let fx = fixture(&cfg, &mut Rng::new(3));
        let pass = model.forward(&input(&fx), Phase::Eval).unwrap();
        // 256 hidden units concatenated with a 100-dimensional entity mean.
        assert_eq!(pass.fusion_input_len(), 356);
    }

    #[test]
    fn averaged_and_doc2vec_share_architecture() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(8);
        let avg_model = build(ModelKind::AveragedMultimodal, &cfg, &mut Rng::new(9)).unwrap();
        let mut doc_model = build(ModelKind::Doc2VecMultimodal, &cfg, &mut Rng::new(10)).unwrap();
        doc_model.set_flat_params(&avg_model.flat_params()).unwrap();

        let fx = fixture(&cfg, &mut rng);
        // Same vector fed through either branch gives the same output.
        let shared: Vec<f64> = (0..cfg.embed_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let in_avg = ModelInput {
            timeseries: Some(&fx.ts),
            avg_entity: Some(&shared),
            ..Default::default()
        };
        let in_doc = ModelInput {
            timeseries: Some(&fx.ts),
            doc_vector: Some(&shared),
            ..Default::default()
        };
        let a = avg_model.forward(&in_avg, Phase::Eval).unwrap();
        let b = doc_model.forward(&in_doc, Phase::Eval).unwrap();
        assert_eq!(a.prob, b.prob);
    }

    #[test]
    fn zero_entity_matrix_still_predicts() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(12);
        let model = build(ModelKind::ProposedCnn, &cfg, &mut rng).unwrap();
        let fx = fixture(&cfg, &mut rng);
        let zero_ents = EntityMatrix {
            values: Matrix::zeros(cfg.k_max, cfg.embed_dim),
            mask: vec![false; cfg.k_max],
            k: 0,
        };
        let inp = ModelInput {
            timeseries: Some(&fx.ts),
            entities: Some(&zero_ents),
            ..Default::default()
        };
        let pass = model.forward(&inp, Phase::Eval).unwrap();
        assert!(pass.prob > 0.0 && pass.prob < 1.0);
    }

    #[test]
    fn proposed_invariant_to_permuting_zero_rows() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(13);
        let model = build(ModelKind::ProposedCnn, &cfg, &mut rng).unwrap();
        let ts = random_matrix(cfg.seq_len, cfg.input_dim, &mut rng);
        let ents = random_entities(cfg.k_max, cfg.embed_dim, 5, &mut rng);
        let base = ModelInput {
            timeseries: Some(&ts),
            entities: Some(&ents),
            ..Default::default()
        };
        let a = model.forward(&base, Phase::Eval).unwrap();
        // Rows 5..8 are zero padding; swapping two of them changes nothing.
        let mut swapped = ents.clone();
        let last = swapped.values.rows() - 1;
        for c in 0..swapped.values.cols() {
            let tmp = swapped.values.get(6, c);
            swapped.values.set(6, c, swapped.values.get(last, c));
            swapped.values.set(last, c, tmp);
        }
        let inp = ModelInput {
            timeseries: Some(&ts),
            entities: Some(&swapped),
            ..Default::default()
        };
        let b = model.forward(&inp, Phase::Eval).unwrap();
        assert_eq!(a.prob, b.prob);
    }

    #[test]
    fn every_model_gradient_matches_finite_differences() {
        // The fixture seed is chosen so pooling and rectifier margins stay
        // well above the probe step; at a kink the two-sided slope is not the
        // derivative and the comparison would be meaningless.
        let cfg = tiny_cfg();
        let mut rng = Rng::new(6);
        let fx = fixture(&cfg, &mut rng);
        for kind in ALL_KINDS {
            let model = build(kind, &cfg, &mut rng).unwrap();
            let pass = model.forward(&input(&fx), Phase::Eval).unwrap();
            assert!(pass.pool_margin() > 1e-3, "{kind:?}: pooled values nearly tied");
            assert!(pass.relu_margin() > 1e-3, "{kind:?}: rectifier input nearly zero");
            let analytic = model.backward(&pass, 1.0).unwrap();

            let params = model.flat_params();
            let mut work = model.clone();
            let numeric = numeric_grad(&params, 1e-5, |p| {
                work.set_flat_params(p).unwrap();
                work.forward(&input(&fx), Phase::Eval).unwrap().prob
            });
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-5, "{kind:?}: max relative error {err}");
        }
    }

    #[test]
    fn train_phase_gradient_with_frozen_mask_matches() {
        // Fixing the dropout seed per evaluation freezes the mask, so the
        // finite-difference check covers the dropout scaling path too.
        let mut cfg = tiny_cfg();
        cfg.dropout = 0.4;
        let mut rng = Rng::new(5);
        let fx = fixture(&cfg, &mut rng);
        let model = build(ModelKind::ProposedCnn, &cfg, &mut rng).unwrap();

        let mask_seed = 77;
        let pass = model
            .forward(&input(&fx), Phase::Train(&mut Rng::new(mask_seed)))
            .unwrap();
        assert!(pass.pool_margin() > 1e-3 && pass.relu_margin() > 1e-3);
        let analytic = model.backward(&pass, 1.0).unwrap();

        let params = model.flat_params();
        let mut work = model.clone();
        let numeric = numeric_grad(&params, 1e-5, |p| {
            work.set_flat_params(p).unwrap();
            work.forward(&input(&fx), Phase::Train(&mut Rng::new(mask_seed)))
                .unwrap()
                .prob
        });
        let err = max_rel_err(&analytic, &numeric);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn missing_inputs_are_rejected() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(41);
        let model = build(ModelKind::ProposedCnn, &cfg, &mut rng).unwrap();
        let fx = fixture(&cfg, &mut rng);
        let no_entities = ModelInput {
            timeseries: Some(&fx.ts),
            ..Default::default()
        };
        assert!(model.forward(&no_entities, Phase::Eval).is_err());
        let no_ts = ModelInput {
            entities: Some(&fx.ents),
            ..Default::default()
        };
        assert!(model.forward(&no_ts, Phase::Eval).is_err());
    }
}
