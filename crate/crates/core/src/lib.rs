//! Multimodal ICU outcome prediction toolkit.
//!
//! Everything is built from scratch on a dense `f64` matrix type: a GRU over
//! hourly vitals, word/subword/document embedding trainers for clinical
//! entity text, a 1-D convolutional fusion model, Adam training with early
//! stopping, ranking metrics, and a synthetic cohort generator standing in
//! for credential-gated ICU data. All randomness flows through a seedable
//! generator so runs are reproducible bit for bit.

pub mod data;
pub mod embed;
pub mod entity;
pub mod error;
pub mod gradcheck;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod train;

pub use data::{Cohort, Labels, PatientRecord, SplitSpec, TaskKind};
pub use error::{Error, Result};
pub use matrix::{glorot_init, map_activation, Activation, Matrix};
pub use metrics::{auprc, auroc, f1, MetricSummary, MetricsReport};
pub use models::{Model, ModelConfig, ModelKind};
pub use rng::Rng;
pub use train::{adam_step, bce_loss, bce_mean, train, AdamState, TrainHistory, TrainSpec};
