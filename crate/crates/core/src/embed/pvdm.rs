//! Distributed-memory paragraph vectors: a per-document vector is averaged
//! with context word vectors to predict the center word via negative
//! sampling, yielding one fixed-length vector per document.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::embed::vocab::{init_vector, ns_update, NegativeSampler, Vocab};
use crate::embed::normalize_token;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Document id to vector store.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl DocVectorTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        DocVectorTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, doc_id: &str) -> Option<&[f64]> {
        self.entries.get(doc_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, doc_id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(
                "doc_vector_insert",
                format!("vector {}", vector.len()),
                format!("dim {}", self.dim),
            ));
        }
        self.entries.insert(doc_id.to_string(), vector);
        Ok(())
    }
}

/// Trains one vector per document id. Documents sharing an id train the same
/// vector.
pub fn train_pvdm(
    docs: &[(String, Vec<String>)],
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<DocVectorTable> {
    if docs.is_empty() || docs.iter().all(|(_, toks)| toks.is_empty()) {
        return Err(Error::InvalidArgument("empty document set".into()));
    }
    if window == 0 || negatives == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "window, negatives, and dim must be at least 1".into(),
        ));
    }

    let sequences: Vec<Vec<String>> = docs
        .iter()
        .map(|(_, toks)| toks.iter().map(|t| normalize_token(t)).collect())
        .collect();
    let vocab = Vocab::build(sequences.iter().map(|s| s.as_slice()));
    let sampler = NegativeSampler::new(vocab.counts());

    // One slot per distinct doc id, in first-occurrence order.
    let mut doc_slot: HashMap<&str, usize> = HashMap::new();
    let mut slot_of_doc: Vec<usize> = Vec::with_capacity(docs.len());
    let mut doc_ids: Vec<&str> = Vec::new();
    for (id, _) in docs {
        let slot = *doc_slot.entry(id.as_str()).or_insert_with(|| {
            doc_ids.push(id.as_str());
            doc_ids.len() - 1
        });
        slot_of_doc.push(slot);
    }

    let mut doc_vecs: Vec<Vec<f64>> = (0..doc_ids.len()).map(|_| init_vector(dim, rng)).collect();
    let mut word_vecs: Vec<Vec<f64>> = (0..vocab.len()).map(|_| init_vector(dim, rng)).collect();
    let mut output: Vec<Vec<f64>> = vec![vec![0.0; dim]; vocab.len()];

    let mut h = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    for _ in 0..epochs {
        for (d, seq) in sequences.iter().enumerate() {
            if seq.is_empty() {
                continue;
            }
            let slot = slot_of_doc[d];
            let ids: Vec<usize> = seq.iter().map(|t| vocab.id(t).expect("in vocab")).collect();
            for center in 0..ids.len() {
                let lo = center.saturating_sub(window);
                let hi = (center + window).min(ids.len() - 1);
                let context: Vec<usize> = (lo..=hi).filter(|&j| j != center).map(|j| ids[j]).collect();
                let parts = 1 + context.len();
                let inv = 1.0 / parts as f64;

                h.copy_from_slice(&doc_vecs[slot]);
                for &c in &context {
                    for (hv, wv) in h.iter_mut().zip(&word_vecs[c]) {
                        *hv += wv;
                    }
                }
                for hv in &mut h {
                    *hv *= inv;
                }

                let center_id = ids[center];
                err.iter_mut().for_each(|e| *e = 0.0);
                ns_update(&h, &mut output[center_id], 1.0, lr, &mut err);
                for _ in 0..negatives {
                    let mut neg = sampler.sample(rng);
                    let mut tries = 0;
                    while neg == center_id && tries < 3 {
                        neg = sampler.sample(rng);
                        tries += 1;
                    }
                    if neg == center_id {
                        continue;
                    }
                    ns_update(&h, &mut output[neg], 0.0, lr, &mut err);
                }

                for (dv, e) in doc_vecs[slot].iter_mut().zip(&err) {
                    *dv += e * inv;
                }
                for &c in &context {
                    for (wv, e) in word_vecs[c].iter_mut().zip(&err) {
                        *wv += e * inv;
                    }
                }
            }
        }
    }

    let mut table = DocVectorTable::new(dim);
    for (slot, id) in doc_ids.iter().enumerate() {
        table.insert(id, doc_vecs[slot].clone())?;
    }
    Ok(table)
}

/// Same line format as word vector files: `doc_id v1 .. vd` with a `V d`
/// header, sorted by id.
pub fn save_doc_table(table: &DocVectorTable, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "{} {}", table.entries.len(), table.dim)?;
    let mut ids: Vec<&String> = table.entries.keys().collect();
    ids.sort();
    for id in ids {
        write!(writer, "{id}")?;
        for v in &table.entries[id] {
            write!(writer, " {v}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn load_doc_table(reader: impl BufRead) -> Result<DocVectorTable> {
    // Doc ids are opaque; reuse the word-table parser without case folding by
    // parsing directly.
    let mut dim: Option<usize> = None;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if idx == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d > 0 {
                    dim = Some(d);
                    continue;
                }
            }
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected doc id and vector".into(),
            });
        }
        let mut vector = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            vector.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric vector component {f:?}"),
            })?);
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {d} components, got {}", vector.len()),
                });
            }
            _ => {}
        }
        entries.insert(fields[0].to_string(), vector);
    }
    let dim = dim.ok_or_else(|| Error::InvalidData("empty doc vector stream".into()))?;
    Ok(DocVectorTable { dim, entries })
}
