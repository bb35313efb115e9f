//! Adam optimization, binary cross-entropy with an L2 penalty on fully
//! connected weights, and the mini-batch training loop with early stopping on
//! validation loss.

use crate::entity::EntityMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{Model, ModelInput, Phase};
use crate::rng::Rng;

/// One prepared patient: the time series plus every entity representation,
/// so any architecture can train on the same set.
#[derive(Debug, Clone)]
pub struct Example {
    pub patient_id: String,
    pub timeseries: Matrix,
    pub avg_entity: Vec<f64>,
    pub doc_vector: Vec<f64>,
    pub entities: EntityMatrix,
    pub label: bool,
}

impl Example {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            timeseries: Some(&self.timeseries),
            avg_entity: Some(&self.avg_entity),
            doc_vector: Some(&self.doc_vector),
            entities: Some(&self.entities),
        }
    }
}

/// Adam with bias correction. Defaults: lr 0.001, beta1 0.9, beta2 0.999,
/// eps 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update, applied in parameter order.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("params {} / grads {}", params.len(), grads.len()),
            format!("state {}", state.m.len()),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

const BCE_EPS: f64 = 1e-12;

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn bce_mean(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape(
            "bce",
            format!("probs {}", probs.len()),
            format!("labels {}", labels.len()),
        ));
    }
    if probs.is_empty() {
        return Err(Error::InvalidArgument("empty prediction set".into()));
    }
    let mut sum = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= if y { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(sum / probs.len() as f64)
}

/// Training objective: mean cross-entropy plus `l2_scale` times the sum of
/// squared fully connected weights.
pub fn bce_loss(probs: &[f64], labels: &[bool], model: &Model, l2_scale: f64) -> Result<f64> {
    Ok(bce_mean(probs, labels)? + l2_scale * model.dense_weight_sq_sum())
}

/// Training protocol parameters. `patience: None` disables early stopping.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub max_epochs: usize,
    pub patience: Option<usize>,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub l2_scale: f64,
    pub lr: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            max_epochs: 50,
            patience: Some(5),
            batch_size: 64,
            seeds: (0..10).collect(),
            l2_scale: 0.01,
            lr: 0.001,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "max_epochs and batch_size must be positive".into(),
            ));
        }
        if let Some(p) = self.patience {
            if p == 0 || p > self.max_epochs {
                return Err(Error::InvalidArgument(format!(
                    "patience {p} must be in 1..=max_epochs ({})",
                    self.max_epochs
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("seed list must be non-empty".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch objective values plus where early stopping landed. Epochs are
/// 1-based in `best_epoch`/`stopped_epoch`.
#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

/// Trains in place: shuffled mini-batches, mean gradient per batch, Adam
/// updates, validation loss after every epoch, and restoration of the
/// best-validation parameters. Validation may be empty only when patience is
/// disabled.
pub fn train(
    model: &mut Model,
    train_set: &[Example],
    val_set: &[Example],
    spec: &TrainSpec,
    rng: &mut Rng,
) -> Result<TrainHistory> {
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if val_set.is_empty() && spec.patience.is_some() {
        return Err(Error::InvalidArgument(
            "early stopping needs a validation set".into(),
        ));
    }

    let mut params = model.flat_params();
    let mut adam = AdamState::new(params.len(), spec.lr);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = vec![0.0; params.len()];

    for epoch in 1..=spec.max_epochs {
        rng.shuffle(&mut indices);
        let mut epoch_bce = 0.0;

        for batch in indices.chunks(spec.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &idx in batch {
                let example = &train_set[idx];
                let pass = model.forward(&example.input(), Phase::Train(rng))?;
                let y = if example.label { 1.0 } else { 0.0 };
                let p = pass.prob;
                epoch_bce -= if example.label {
                    p.clamp(BCE_EPS, 1.0 - BCE_EPS).ln()
                } else {
                    (1.0 - p.clamp(BCE_EPS, 1.0 - BCE_EPS)).ln()
                };
                let example_grads = model.backward_logit(&pass, (p - y) * inv)?;
                for (g, e) in grads.iter_mut().zip(&example_grads) {
                    *g += e;
                }
            }
            model.add_l2_grads(spec.l2_scale, &mut grads);
            adam_step(&mut adam, &mut params, &grads)?;
            model.set_flat_params(&params)?;
        }

        let train_objective = epoch_bce / train_set.len() as f64
            + spec.l2_scale * model.dense_weight_sq_sum();
        history.train_loss.push(train_objective);
        history.stopped_epoch = epoch;

        if !val_set.is_empty() {
            let (probs, labels) = predict(model, val_set)?;
            let val = bce_loss(&probs, &labels, model, spec.l2_scale)?;
            history.val_loss.push(val);
            if val < best_val {
                best_val = val;
                best_params.copy_from_slice(&params);
                history.best_epoch = epoch;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
            }
            if let Some(patience) = spec.patience {
                if epochs_since_best >= patience {
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
            best_params.copy_from_slice(&params);
        }
    }

    model.set_flat_params(&best_params)?;
    Ok(history)
}

/// Inference-mode probabilities and labels for a set of examples.
pub fn predict(model: &Model, examples: &[Example]) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut probs = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for ex in examples {
        let pass = model.forward(&ex.input(), Phase::Eval)?;
        probs.push(pass.prob);
        labels.push(ex.label);
    }
    Ok((probs, labels))
}
