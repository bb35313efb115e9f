//! Evaluation metrics for imbalanced binary classification: AUROC (rank
//! based, ties counted half), AUPRC as average precision, and F1 at a
//! threshold.

use crate::error::{Error, Result};

fn validate(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "metrics",
            format!("scores {}", scores.len()),
            format!("labels {}", labels.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidData("scores contain NaN or Inf".into()));
    }
    Ok(())
}

/// Probability that a uniformly random positive outranks a uniformly random
/// negative, with ties counted one half. Computed from tie-averaged ranks
/// (Mann-Whitney), which agrees exactly with pairwise counting.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    validate(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidData(format!(
            "AUROC needs both classes; got {pos} positives and {neg} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Average rank within each tie group; ranks are 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: mean over positives, taken in score-descending order,
/// of the precision at that positive's rank. Ties keep their input order.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    validate(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(Error::InvalidData("AUPRC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort: equal scores stay in input order.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut true_pos = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] {
            true_pos += 1;
            sum += true_pos as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Harmonic mean of precision and recall with predictions `score >=
/// threshold`; 0 when precision and recall are both undefined or zero.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    validate(scores, labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&s, &l) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fne) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean, standard deviation (population, over seeds), and the raw per-seed
/// values of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>) -> MetricSummary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MetricSummary {
            mean,
            std: var.sqrt(),
            per_seed: values,
        }
    }
}

/// AUROC/AUPRC/F1 aggregated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub auroc: MetricSummary,
    pub auprc: MetricSummary,
    pub f1: MetricSummary,
}

impl MetricsReport {
    pub fn from_seed_runs(runs: &[(f64, f64, f64)]) -> MetricsReport {
        MetricsReport {
            auroc: MetricSummary::from_values(runs.iter().map(|r| r.0).collect()),
            auprc: MetricSummary::from_values(runs.iter().map(|r| r.1).collect()),
            f1: MetricSummary::from_values(runs.iter().map(|r| r.2).collect()),
        }
    }
}
