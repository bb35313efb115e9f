//! Subword embeddings: skip-gram training where a word is represented by the
//! mean of its own vector and hashed character n-gram vectors, so any token
//! (seen or not) has a defined embedding.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::embed::vocab::{init_vector, ns_update, NegativeSampler, Vocab};
use crate::embed::{normalize_token, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const NGRAM_MIN: usize = 3;
pub const NGRAM_MAX: usize = 6;

/// Hashed n-gram vectors plus per-word vectors. Lookup of an in-vocabulary
/// token is the mean of its word vector and its n-gram vectors; lookup of an
/// out-of-vocabulary token is the mean of its n-gram vectors alone, so the
/// map is total.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTable {
    dim: usize,
    buckets: usize,
    ngram_vectors: Vec<Vec<f64>>,
    word_vectors: HashMap<String, Vec<f64>>,
}

impl SubwordTable {
    pub fn new(dim: usize, buckets: usize) -> Self {
        assert!(dim > 0 && buckets > 0);
        SubwordTable {
            dim,
            buckets,
            ngram_vectors: vec![vec![0.0; dim]; buckets],
            word_vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn vocab_len(&self) -> usize {
        self.word_vectors.len()
    }

    /// Bucket ids for the 3..=6 character n-grams of the boundary-wrapped
    /// token. Every non-empty token yields at least one n-gram because the
    /// wrapped form is at least three characters.
    pub fn ngram_ids(&self, token: &str) -> Vec<usize> {
        ngram_ids(token, self.buckets)
    }

    /// Total lookup; never absent for non-empty tokens. Empty text maps to
    /// zeros.
    pub fn lookup(&self, token: &str) -> Vec<f64> {
        let token = normalize_token(token);
        let ids = self.ngram_ids(&token);
        let mut sum = vec![0.0; self.dim];
        let mut parts = 0usize;
        if let Some(wv) = self.word_vectors.get(&token) {
            for (s, v) in sum.iter_mut().zip(wv) {
                *s += v;
            }
            parts += 1;
        }
        for &id in &ids {
            for (s, v) in sum.iter_mut().zip(&self.ngram_vectors[id]) {
                *s += v;
            }
        }
        parts += ids.len();
        if parts > 0 {
            let inv = 1.0 / parts as f64;
            for s in &mut sum {
                *s *= inv;
            }
        }
        sum
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF29CE484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001B3);
    }
    hash
}

fn ngram_ids(token: &str, buckets: usize) -> Vec<usize> {
    if token.is_empty() {
        return Vec::new();
    }
    let wrapped: Vec<char> = format!("<{token}>").chars().collect();
    let mut ids = Vec::new();
    for n in NGRAM_MIN..=NGRAM_MAX {
        if wrapped.len() < n {
            break;
        }
        for start in 0..=wrapped.len() - n {
            let gram: String = wrapped[start..start + n].iter().collect();
            ids.push((fnv1a64(gram.as_bytes()) % buckets as u64) as usize);
        }
    }
    ids
}

/// Skip-gram with negative sampling over subword-composed input vectors. The
/// input-side gradient for each pair is split evenly across the word vector
/// and its n-gram bucket vectors.
#[allow(clippy::too_many_arguments)]
pub fn train_fasttext(
    corpus: &[Vec<String>],
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    lr: f64,
    buckets: usize,
    rng: &mut Rng,
) -> Result<SubwordTable> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    if window == 0 || negatives == 0 || buckets == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "window, negatives, buckets, and dim must be at least 1".into(),
        ));
    }

    let sequences: Vec<Vec<String>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| normalize_token(t)).collect())
        .collect();
    let vocab = Vocab::build(sequences.iter().map(|s| s.as_slice()));
    let sampler = NegativeSampler::new(vocab.counts());

    let mut word_vecs: Vec<Vec<f64>> = (0..vocab.len()).map(|_| init_vector(dim, rng)).collect();
    let mut ngram_vecs: Vec<Vec<f64>> = (0..buckets).map(|_| init_vector(dim, rng)).collect();
    let mut output: Vec<Vec<f64>> = vec![vec![0.0; dim]; vocab.len()];
    let word_ngrams: Vec<Vec<usize>> = (0..vocab.len())
        .map(|id| ngram_ids(vocab.token(id), buckets))
        .collect();

    let mut h = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    for _ in 0..epochs {
        for seq in &sequences {
            let ids: Vec<usize> = seq.iter().map(|t| vocab.id(t).expect("in vocab")).collect();
            for center in 0..ids.len() {
                let span = rng.range_inclusive(1, window);
                let lo = center.saturating_sub(span);
                let hi = (center + span).min(ids.len() - 1);
                for ctx in lo..=hi {
                    if ctx == center {
                        continue;
                    }
                    let center_id = ids[center];
                    let ctx_id = ids[ctx];
                    let grams = &word_ngrams[center_id];
                    let parts = 1 + grams.len();
                    let inv = 1.0 / parts as f64;

                    h.copy_from_slice(&word_vecs[center_id]);
                    for &g in grams {
                        for (hv, nv) in h.iter_mut().zip(&ngram_vecs[g]) {
                            *hv += nv;
                        }
                    }
                    for hv in &mut h {
                        *hv *= inv;
                    }

                    err.iter_mut().for_each(|e| *e = 0.0);
                    ns_update(&h, &mut output[ctx_id], 1.0, lr, &mut err);
                    for _ in 0..negatives {
                        let mut neg = sampler.sample(rng);
                        let mut tries = 0;
                        while neg == ctx_id && tries < 3 {
                            neg = sampler.sample(rng);
                            tries += 1;
                        }
                        if neg == ctx_id {
                            continue;
                        }
                        ns_update(&h, &mut output[neg], 0.0, lr, &mut err);
                    }

                    for (wv, e) in word_vecs[center_id].iter_mut().zip(&err) {
                        *wv += e * inv;
                    }
                    for &g in grams {
                        for (nv, e) in ngram_vecs[g].iter_mut().zip(&err) {
                            *nv += e * inv;
                        }
                    }
                }
            }
        }
    }

    let mut table = SubwordTable::new(dim, buckets);
    table.ngram_vectors = ngram_vecs;
    for (id, vec) in word_vecs.into_iter().enumerate() {
        table.word_vectors.insert(vocab.token(id).to_string(), vec);
    }
    Ok(table)
}

/// Writes bucket vectors under reserved `__bucket<i>__` tokens followed by
/// word vectors, after a comment header carrying the bucket count.
pub fn save_subword_table(table: &SubwordTable, mut writer: impl Write) -> Result<()> {
    writeln!(
        writer,
        "# subword-table buckets={} dim={}",
        table.buckets, table.dim
    )?;
    for (i, v) in table.ngram_vectors.iter().enumerate() {
        write!(writer, "__bucket{i}__")?;
        for x in v {
            write!(writer, " {x}")?;
        }
        writeln!(writer)?;
    }
    let mut tokens: Vec<&String> = table.word_vectors.keys().collect();
    tokens.sort();
    for tok in tokens {
        write!(writer, "{tok}")?;
        for x in &table.word_vectors[tok] {
            write!(writer, " {x}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn load_subword_table(reader: impl BufRead) -> Result<SubwordTable> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty subword table stream".into()))??;
    let (buckets, dim) = parse_subword_header(&header)?;
    let mut table = SubwordTable::new(dim, buckets);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected token and {dim} components, got {} fields", fields.len()),
            });
        }
        let mut vector = Vec::with_capacity(dim);
        for f in &fields[1..] {
            vector.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric vector component {f:?}"),
            })?);
        }
        let token = fields[0];
        if let Some(bucket) = token
            .strip_prefix("__bucket")
            .and_then(|s| s.strip_suffix("__"))
        {
            let i: usize = bucket.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad bucket token {token:?}"),
            })?;
            if i >= buckets {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("bucket {i} out of range (buckets={buckets})"),
                });
            }
            table.ngram_vectors[i] = vector;
        } else {
            table.word_vectors.insert(normalize_token(token), vector);
        }
    }
    Ok(table)
}

fn parse_subword_header(line: &str) -> Result<(usize, usize)> {
    let err = || Error::Parse {
        line: 1,
        msg: format!("expected '# subword-table buckets=B dim=D', got {line:?}"),
    };
    let rest = line.strip_prefix("# subword-table ").ok_or_else(err)?;
    let mut buckets = None;
    let mut dim = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("buckets=") {
            buckets = v.parse().ok();
        } else if let Some(v) = field.strip_prefix("dim=") {
            dim = v.parse().ok();
        }
    }
    match (buckets, dim) {
        (Some(b), Some(d)) if b > 0 && d > 0 => Ok((b, d)),
        _ => Err(err()),
    }
}

/// Converts the total subword map into a plain table over its trained
/// vocabulary (used when a fixed-vocabulary view is needed).
pub fn to_word_table(table: &SubwordTable) -> EmbeddingTable {
    let mut out = EmbeddingTable::new(table.dim);
    for token in table.word_vectors.keys() {
        out.insert(token, table.lookup(token)).expect("dims match");
    }
    out
}
