//! Vocabulary and unigram^0.75 negative sampling shared by the trainers.

use std::collections::HashMap;

use crate::rng::Rng;

pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocab {
    /// Builds the vocabulary in first-occurrence order so training is
    /// deterministic for a fixed corpus order.
    pub fn build<'a>(sequences: impl Iterator<Item = &'a [String]>) -> Vocab {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
            counts: Vec::new(),
        };
        for seq in sequences {
            for tok in seq {
                match vocab.index.get(tok) {
                    Some(&id) => vocab.counts[id] += 1,
                    None => {
                        let id = vocab.tokens.len();
                        vocab.index.insert(tok.clone(), id);
                        vocab.tokens.push(tok.clone());
                        vocab.counts.push(1);
                    }
                }
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Draws word ids with probability proportional to count^0.75.
pub struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> NegativeSampler {
        let mut cdf = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(0.75);
            cdf.push(acc);
        }
        NegativeSampler { cdf }
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cdf.last().expect("sampler over empty vocabulary");
        let target = rng.next_f64() * total;
        match self
            .cdf
            .binary_search_by(|probe| probe.partial_cmp(&target).expect("cdf is finite"))
        {
            Ok(i) => (i + 1).min(self.cdf.len() - 1),
            Err(i) => i,
        }
    }
}

/// Uniform init in [-0.5/dim, 0.5/dim), the usual scale for embedding inputs.
pub fn init_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..dim).map(|_| rng.uniform(-half, half)).collect()
}

/// One negative-sampling update for a context vector `h` against a target
/// word's output vector. Returns nothing; accumulates the input-side gradient
/// into `err`.
pub fn ns_update(
    h: &[f64],
    output: &mut [f64],
    label: f64,
    lr: f64,
    err: &mut [f64],
) {
    let mut score = 0.0;
    for (a, b) in h.iter().zip(output.iter()) {
        score += a * b;
    }
    let pred = 1.0 / (1.0 + (-score).exp());
    let g = (label - pred) * lr;
    for ((e, o), &hv) in err.iter_mut().zip(output.iter_mut()).zip(h) {
        *e += g * *o;
        *o += g * hv;
    }
}
