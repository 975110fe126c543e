use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{neg_log_sigmoid, sigmoid, NegativeSampler, Vocab};
use super::{dot, WordEmbedding, EMBEDDING_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::textprep::TokenList;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbowConfig {
    pub dim: usize,
    pub vocab_size: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 10,
            vocab_size: 5000,
            window: 5,
            negative: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// A CBOW embedding plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedWords {
    pub format_version: u32,
    pub config: CbowConfig,
    pub counts: Vec<u64>,
    /// Mean negative-sampling loss per (target, sample) pair, one per epoch.
    pub epoch_losses: Vec<f64>,
    pub embedding: WordEmbedding,
}

const MIN_LR_FRACTION: f64 = 1e-4;

/// Trains CBOW with negative sampling, word2vec style: the context mean
/// predicts the centre word; the context error is added to every context row.
pub fn train_cbow(streams: &[TokenList], config: &CbowConfig) -> Result<TrainedWords> {
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(Error::invalid("cbow dim, window and epochs must be positive"));
    }
    let vocab = Vocab::build(streams.iter().map(|s| s.tokens.as_slice()), config.vocab_size);
    if vocab.len() < 2 {
        return Err(Error::invalid("cbow needs at least two distinct tokens"));
    }
    let index = vocab.index();
    let ids: Vec<Vec<usize>> = streams
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t).copied()).collect())
        .collect();
    let total_words: usize = ids.iter().map(Vec::len).sum();

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut syn0: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut syn1 = vec![0.0; vocab.len() * dim];
    let sampler = NegativeSampler::new(&vocab.counts);

    let schedule = (config.epochs * total_words) as f64 + 1.0;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut h = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut ctx = Vec::with_capacity(2 * config.window);

    for _ in 0..config.epochs {
        let (mut loss, mut pairs) = (0.0, 0usize);
        for doc in &ids {
            for pos in 0..doc.len() {
                let lr = config.learning_rate
                    * (1.0 - processed as f64 / schedule).max(MIN_LR_FRACTION);
                processed += 1;
                let reach = config.window - rng.random_range(0..config.window);
                ctx.clear();
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(doc.len() - 1);
                ctx.extend((lo..=hi).filter(|&c| c != pos).map(|c| doc[c]));
                if ctx.is_empty() {
                    continue;
                }
                h.fill(0.0);
                for &c in &ctx {
                    for (hk, x) in h.iter_mut().zip(&syn0[c * dim..(c + 1) * dim]) {
                        *hk += x;
                    }
                }
                let inv = 1.0 / ctx.len() as f64;
                h.iter_mut().for_each(|x| *x *= inv);
                err.fill(0.0);

                let centre = doc[pos];
                for d in 0..=config.negative {
                    let (target, label) = if d == 0 {
                        (centre, 1.0)
                    } else {
                        let t = sampler.sample(&mut rng);
                        if t == centre {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let out = &mut syn1[target * dim..(target + 1) * dim];
                    let f = dot(&h, out);
                    loss += if label > 0.0 {
                        neg_log_sigmoid(f)
                    } else {
                        neg_log_sigmoid(-f)
                    };
                    pairs += 1;
                    let g = (label - sigmoid(f)) * lr;
                    for k in 0..dim {
                        err[k] += g * out[k];
                        out[k] += g * h[k];
                    }
                }
                for &c in &ctx {
                    for (x, e) in syn0[c * dim..(c + 1) * dim].iter_mut().zip(&err) {
                        *x += e;
                    }
                }
            }
        }
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    Ok(TrainedWords {
        format_version: EMBEDDING_FORMAT_VERSION,
        config: config.clone(),
        counts: vocab.counts,
        epoch_losses,
        embedding: WordEmbedding::from_flat(vocab.words, dim, syn0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> TokenList {
        TokenList {
            tokens: s.split_whitespace().map(String::from).collect(),
        }
    }

    #[test]
    fn rejects_single_token_corpus() {
        let streams = vec![toks("same same same")];
        assert!(train_cbow(&streams, &CbowConfig::default()).is_err());
    }

    #[test]
    fn vocab_clamps_to_distinct_tokens() {
        let streams = vec![toks("a b c a b"), toks("c d")];
        let t = train_cbow(&streams, &CbowConfig::default()).unwrap();
        assert_eq!(t.embedding.len(), 4);
        assert_eq!(t.embedding.dim(), 10);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let streams = vec![toks("a b c d e f"), toks("f e d c b a a")];
        let cfg = CbowConfig {
            seed: 9,
            ..CbowConfig::default()
        };
        let a = train_cbow(&streams, &cfg).unwrap();
        let b = train_cbow(&streams, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_cbow(&streams, &CbowConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.embedding, c.embedding);
    }
}
