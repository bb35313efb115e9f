//! Skip-gram with negative sampling.

use crate::embed::vocab::{init_vector, ns_update, NegativeSampler, Vocab};
use crate::embed::{normalize_token, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Trains word vectors on tokenized sequences. For every center position a
/// dynamic window of 1..=window is drawn, the center's input vector is pushed
/// toward each context word's output vector, and `negatives` samples from the
/// unigram^0.75 distribution are pushed away.
///
/// The returned table holds the sum of each word's input and context vectors.
/// Input vectors alone only capture second-order similarity (shared
/// contexts); the sum also scores directly co-occurring tokens as similar,
/// which is what entity phrases need.
pub fn train_sgns(
    corpus: &[Vec<String>],
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<EmbeddingTable> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    if window == 0 || negatives == 0 {
        return Err(Error::InvalidArgument(
            "window and negatives must be at least 1".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }

    let sequences: Vec<Vec<String>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| normalize_token(t)).collect())
        .collect();
    let vocab = Vocab::build(sequences.iter().map(|s| s.as_slice()));
    let sampler = NegativeSampler::new(vocab.counts());

    let mut input: Vec<Vec<f64>> = (0..vocab.len()).map(|_| init_vector(dim, rng)).collect();
    let mut output: Vec<Vec<f64>> = vec![vec![0.0; dim]; vocab.len()];
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
                    err.iter_mut().for_each(|e| *e = 0.0);
                    {
                        let h = input[center_id].clone();
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
                    }
                    for (v, e) in input[center_id].iter_mut().zip(&err) {
                        *v += e;
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim);
    for id in 0..vocab.len() {
        let combined: Vec<f64> = input[id]
            .iter()
            .zip(&output[id])
            .map(|(a, b)| a + b)
            .collect();
        table.insert(vocab.token(id), combined)?;
    }
    Ok(table)
}

#[cfg(test)]
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
