//! Experiment protocol: turn cohort records into per-patient training
//! examples under a chosen embedding, then run the multi-seed
//! build/train/evaluate loop and aggregate metrics.

use crate::data::{Cohort, PatientRecord, TaskKind};
use crate::embed::{tokenize, DocVectorTable, WordEmbedder};
use crate::entity::{average_representation, entity_matrix, EntityMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{auprc, auroc, f1, MetricsReport};
use crate::models::{build, ModelConfig, ModelKind};
use crate::rng::Rng;
use crate::train::{predict, train, Example, TrainSpec};

/// The four entity-embedding schemes a run can pair with a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingKind {
    Word2vec,
    Fasttext,
    Concat,
    Doc2vec,
}

impl EmbeddingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingKind::Word2vec => "word2vec",
            EmbeddingKind::Fasttext => "fasttext",
            EmbeddingKind::Concat => "concat",
            EmbeddingKind::Doc2vec => "doc2vec",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "word2vec" => Ok(EmbeddingKind::Word2vec),
            "fasttext" => Ok(EmbeddingKind::Fasttext),
            "concat" => Ok(EmbeddingKind::Concat),
            "doc2vec" => Ok(EmbeddingKind::Doc2vec),
            other => Err(Error::InvalidArgument(format!(
                "unknown embedding {other:?}"
            ))),
        }
    }

    pub fn is_word_level(&self) -> bool {
        !matches!(self, EmbeddingKind::Doc2vec)
    }
}

/// Which (model, embedding) pairings are meaningful: the GRU baseline takes
/// no embedding, the document-vector model takes only document vectors, and
/// the remaining architectures take word-level embeddings.
pub fn pairing_valid(model: ModelKind, embedding: Option<EmbeddingKind>) -> bool {
    match model {
        ModelKind::GruBaseline => embedding.is_none(),
        ModelKind::Doc2VecMultimodal => embedding == Some(EmbeddingKind::Doc2vec),
        ModelKind::AveragedMultimodal | ModelKind::EntitiesOnly | ModelKind::ProposedCnn => {
            embedding.is_some_and(|e| e.is_word_level())
        }
    }
}

/// Per-patient entity token documents (chart-time order), the corpus for the
/// document-vector trainer and for embedding training in general.
pub fn entity_documents(records: &[PatientRecord]) -> Vec<(String, Vec<String>)> {
    records
        .iter()
        .map(|rec| (rec.patient_id.clone(), entity_tokens(&rec.entities)))
        .collect()
}

/// Same as [`entity_documents`] but over raw (patient id, entity) pairs as
/// loaded from an entities file; patients appear in first-occurrence order.
pub fn documents_from_entities(
    pairs: &[(String, crate::entity::MedicalEntity)],
) -> Vec<(String, Vec<String>)> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: std::collections::HashMap<&str, Vec<&crate::entity::MedicalEntity>> =
        std::collections::HashMap::new();
    for (id, entity) in pairs {
        let slot = grouped.entry(id.as_str()).or_default();
        if slot.is_empty() {
            order.push(id.as_str());
        }
        slot.push(entity);
    }
    order
        .into_iter()
        .map(|id| {
            let ents: Vec<crate::entity::MedicalEntity> =
                grouped[id].iter().map(|&e| e.clone()).collect();
            (id.to_string(), entity_tokens(&ents))
        })
        .collect()
}

fn entity_tokens(entities: &[crate::entity::MedicalEntity]) -> Vec<String> {
    let mut order: Vec<usize> = (0..entities.len()).collect();
    order.sort_by(|&a, &b| {
        let ea = &entities[a];
        let eb = &entities[b];
        (ea.chart_hour, &ea.note_id, a).cmp(&(eb.chart_hour, &eb.note_id, b))
    });
    let mut tokens = Vec::new();
    for &i in &order {
        tokens.extend(tokenize(&entities[i].text));
    }
    tokens
}

/// Builds training examples: every available representation is materialized
/// once per patient so all architectures can share the set. Representations
/// without a source stay empty and any model that needs them fails loudly.
pub fn prepare_examples(
    records: &[PatientRecord],
    task: TaskKind,
    word: Option<&WordEmbedder>,
    docs: Option<&DocVectorTable>,
    k_max: usize,
) -> Result<Vec<Example>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let (avg, ents) = match word {
            Some(embedder) => (
                average_representation(&rec.entities, embedder),
                entity_matrix(&rec.entities, embedder, k_max)?,
            ),
            None => (
                Vec::new(),
                EntityMatrix {
                    values: Matrix::zeros(1, 1),
                    mask: vec![false],
                    k: 0,
                },
            ),
        };
        let doc = match docs {
            Some(table) => table
                .lookup(&rec.patient_id)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; table.dim()]),
            None => Vec::new(),
        };
        out.push(Example {
            patient_id: rec.patient_id.clone(),
            timeseries: rec.timeseries.clone(),
            avg_entity: avg,
            doc_vector: doc,
            entities: ents,
            label: rec.labels.get(task),
        });
    }
    Ok(out)
}

/// Examples for the three partitions of one split.
pub struct PreparedSplit {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl PreparedSplit {
    pub fn prepare(
        split: (&Cohort, &Cohort, &Cohort),
        task: TaskKind,
        word: Option<&WordEmbedder>,
        docs: Option<&DocVectorTable>,
        k_max: usize,
    ) -> Result<PreparedSplit> {
        Ok(PreparedSplit {
            train: prepare_examples(&split.0.records, task, word, docs, k_max)?,
            val: prepare_examples(&split.1.records, task, word, docs, k_max)?,
            test: prepare_examples(&split.2.records, task, word, docs, k_max)?,
        })
    }
}

/// For every seed: build, train with early stopping, score the test
/// partition; then aggregate AUROC/AUPRC/F1 as mean and standard deviation
/// over seeds (in seed order).
pub fn run_protocol(
    kind: ModelKind,
    cfg: &ModelConfig,
    spec: &TrainSpec,
    prepared: &PreparedSplit,
    f1_threshold: f64,
) -> Result<MetricsReport> {
    spec.validate()?;
    let mut runs = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let mut rng = Rng::new(seed);
        let mut model = build(kind, cfg, &mut rng)?;
        train(&mut model, &prepared.train, &prepared.val, spec, &mut rng)?;
        let (scores, labels) = predict(&model, &prepared.test)?;
        runs.push((
            auroc(&scores, &labels)?,
            auprc(&scores, &labels)?,
            f1(&scores, &labels, f1_threshold)?,
        ));
    }
    Ok(MetricsReport::from_seed_runs(&runs))
}
