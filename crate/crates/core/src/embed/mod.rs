//! Token-vector stores and trainers for the three word-level embedding
//! schemes (skip-gram, subword, concatenation) and document vectors.
//!
//! Tokens are lowercase-normalized at load, train, and lookup time. Vector
//! files are plain UTF-8 text: one entry per line, token followed by the
//! vector components, with an optional `V d` count/dimension header. Floats
//! are written in shortest round-trip form so a save/load cycle is exact.

pub mod fasttext;
pub mod pvdm;
pub mod sgns;
mod vocab;

pub use fasttext::{load_subword_table, save_subword_table, train_fasttext, SubwordTable};
pub use pvdm::{load_doc_table, save_doc_table, train_pvdm, DocVectorTable};
pub use sgns::train_sgns;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Lowercase a single token.
pub fn normalize_token(token: &str) -> String {
    token.to_lowercase()
}

/// Whitespace tokenization plus lowercasing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(normalize_token).collect()
}

/// Fixed-dimension token to vector store.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
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

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(
                "embedding_insert",
                format!("vector {}", vector.len()),
                format!("dim {}", self.dim),
            ));
        }
        self.entries.insert(normalize_token(token), vector);
        Ok(())
    }

    /// Vector for a token, or `None` when absent. Absence is distinct from a
    /// zero vector; callers decide how to pad.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(&normalize_token(token)).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Vector for a token if present (case-folded), `None` otherwise.
pub fn lookup_word2vec<'t>(table: &'t EmbeddingTable, token: &str) -> Option<&'t [f64]> {
    table.lookup(token)
}

/// Horizontal concatenation of the word-level and subword representations.
/// The first half is zero when the token is missing from the word table; the
/// subword half is always defined.
pub fn lookup_concat(w2v: &EmbeddingTable, ft: &SubwordTable, token: &str) -> Result<Vec<f64>> {
    if w2v.dim() != ft.dim() {
        return Err(Error::shape(
            "lookup_concat",
            format!("word dim {}", w2v.dim()),
            format!("subword dim {}", ft.dim()),
        ));
    }
    let mut out = Vec::with_capacity(2 * w2v.dim());
    match w2v.lookup(token) {
        Some(v) => out.extend_from_slice(v),
        None => out.resize(w2v.dim(), 0.0),
    }
    out.extend_from_slice(&ft.lookup(token));
    Ok(out)
}

/// One of the three word-level embedding schemes, presented as a total
/// token-to-vector map with a fixed output dimension.
#[derive(Debug, Clone, Copy)]
pub enum WordEmbedder<'a> {
    Word2vec(&'a EmbeddingTable),
    Fasttext(&'a SubwordTable),
    Concat(&'a EmbeddingTable, &'a SubwordTable),
}

impl<'a> WordEmbedder<'a> {
    pub fn concat(w2v: &'a EmbeddingTable, ft: &'a SubwordTable) -> Result<Self> {
        if w2v.dim() != ft.dim() {
            return Err(Error::shape(
                "concat_embedder",
                format!("word dim {}", w2v.dim()),
                format!("subword dim {}", ft.dim()),
            ));
        }
        Ok(WordEmbedder::Concat(w2v, ft))
    }

    pub fn dim(&self) -> usize {
        match self {
            WordEmbedder::Word2vec(t) => t.dim(),
            WordEmbedder::Fasttext(t) => t.dim(),
            WordEmbedder::Concat(w, _) => 2 * w.dim(),
        }
    }

    /// Total lookup: tokens missing from a word-level table embed as zeros
    /// (in the concat case only the word half is zero-padded).
    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        match self {
            WordEmbedder::Word2vec(t) => t
                .lookup(token)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.dim()]),
            WordEmbedder::Fasttext(t) => t.lookup(token),
            WordEmbedder::Concat(w, f) => {
                lookup_concat(w, f, token).expect("dims checked at construction")
            }
        }
    }

    /// Multi-word entity text embeds as the mean of its token vectors; empty
    /// text embeds as zeros.
    pub fn embed_phrase(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut out = vec![0.0; self.dim()];
        if tokens.is_empty() {
            return out;
        }
        for tok in &tokens {
            let v = self.embed_token(tok);
            for (o, x) in out.iter_mut().zip(&v) {
                *o += x;
            }
        }
        let inv = 1.0 / tokens.len() as f64;
        for o in &mut out {
            *o *= inv;
        }
        out
    }
}

/// Parses a vector stream: optional `V d` header, then `token v1 .. vd`
/// lines. Duplicate tokens keep the last entry.
pub fn load_table(reader: impl BufRead) -> Result<EmbeddingTable> {
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
                if d == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "header dimension must be positive".into(),
                    });
                }
                dim = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected token and vector, got {} fields", fields.len()),
            });
        }
        let token = fields[0];
        let mut vector = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric vector component {f:?}"),
            })?;
            vector.push(v);
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
        entries.insert(normalize_token(token), vector);
    }
    let dim = dim.ok_or_else(|| Error::InvalidData("empty vector stream".into()))?;
    Ok(EmbeddingTable { dim, entries })
}

/// Writes a table with a `V d` header, entries sorted by token.
pub fn save_table(table: &EmbeddingTable, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "{} {}", table.entries.len(), table.dim)?;
    let mut tokens: Vec<&String> = table.entries.keys().collect();
    tokens.sort();
    for tok in tokens {
        write!(writer, "{tok}")?;
        for v in &table.entries[tok] {
            write!(writer, " {v}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
