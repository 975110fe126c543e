use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{sigmoid, NegativeSampler, Vocab};
use super::{dot, EMBEDDING_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::textprep::TokenList;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocConfig {
    pub dim: usize,
    pub vocab_size: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Passes over the tokens when inferring a vector for an unseen ticket.
    pub infer_steps: usize,
    pub seed: u64,
}

impl Default for DocConfig {
    fn default() -> Self {
        DocConfig {
            dim: 20,
            vocab_size: 20_000,
            negative: 5,
            epochs: 10,
            learning_rate: 0.025,
            infer_steps: 50,
            seed: 1,
        }
    }
}

/// How a ticket's document vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocVecSource {
    Trained,
    Inferred,
    /// No tokens at all; zero vector.
    Empty,
    /// Tokens present but none in the vocabulary; zero vector.
    OutOfVocabulary,
}

impl DocVecSource {
    pub fn is_zero(self) -> bool {
        matches!(self, DocVecSource::Empty | DocVecSource::OutOfVocabulary)
    }
}

/// PV-DBOW document vectors with the output layer kept for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEmbedding {
    pub format_version: u32,
    pub config: DocConfig,
    pub vocab: Vocab,
    /// |vocab| × dim output weights, row-major; frozen after training.
    output: Vec<f64>,
    doc_vectors: BTreeMap<String, Vec<f64>>,
    sources: BTreeMap<String, DocVecSource>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl DocEmbedding {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn len(&self) -> usize {
        self.doc_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_vectors.is_empty()
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.doc_vectors.get(id).map(Vec::as_slice)
    }

    pub fn source(&self, id: &str) -> Option<DocVecSource> {
        self.sources.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.doc_vectors.keys().map(String::as_str)
    }

    /// The stored vector for `id`, else one inferred from `tokens`.
    pub fn vector_or_infer(&self, id: &str, tokens: &TokenList) -> (Vec<f64>, DocVecSource) {
        match (self.doc_vectors.get(id), self.sources.get(id)) {
            (Some(v), Some(&src)) => (v.clone(), src),
            _ => infer_docvec(self, tokens, self.config.seed ^ hash_id(id)),
        }
    }

    /// Rebuilds the word index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .vocab
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    fn ids_of(&self, tokens: &TokenList) -> Vec<usize> {
        if self.index.len() != self.vocab.len() {
            let idx = self.vocab.index();
            return tokens.iter().filter_map(|t| idx.get(t).copied()).collect();
        }
        tokens.iter().filter_map(|t| self.index.get(t).copied()).collect()
    }
}

// FNV-1a; stable across platforms and runs, unlike the std hasher.
fn hash_id(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Positive target then negatives, skipping draws that hit the positive.
fn targets(word: usize, negative: usize, sampler: &NegativeSampler, rng: &mut ChaCha8Rng) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(negative + 1);
    out.push((word, 1.0));
    for _ in 0..negative {
        let t = sampler.sample(rng);
        if t != word {
            out.push((t, 0.0));
        }
    }
    out
}

/// Trains PV-DBOW vectors for every `(id, tokens)` document.
pub fn train_docvecs(docs: &[(String, TokenList)], config: &DocConfig) -> Result<DocEmbedding> {
    if docs.is_empty() {
        return Err(Error::invalid("document embedding needs a non-empty corpus"));
    }
    if config.dim == 0 || config.epochs == 0 {
        return Err(Error::invalid("doc dim and epochs must be positive"));
    }
    let vocab = Vocab::build(docs.iter().map(|(_, t)| t.tokens.as_slice()), config.vocab_size);
    if vocab.is_empty() {
        return Err(Error::invalid("document corpus has no tokens"));
    }
    let index = vocab.index();
    let ids: Vec<Vec<usize>> = docs
        .iter()
        .map(|(_, t)| t.iter().filter_map(|w| index.get(w).copied()).collect())
        .collect();
    let total: usize = ids.iter().map(Vec::len).sum();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut vecs: Vec<Vec<f64>> = ids
        .iter()
        .map(|d| {
            if d.is_empty() {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| rng.random_range(-bound..bound)).collect()
            }
        })
        .collect();
    let mut output = vec![0.0; vocab.len() * dim];
    let sampler = NegativeSampler::new(&vocab.counts);
    let schedule = (config.epochs * total) as f64 + 1.0;
    let mut processed = 0usize;
    let mut err = vec![0.0; dim];

    for _ in 0..config.epochs {
        for (doc, v) in ids.iter().zip(vecs.iter_mut()) {
            for &w in doc {
                let lr = config.learning_rate * (1.0 - processed as f64 / schedule).max(1e-4);
                processed += 1;
                err.fill(0.0);
                for (t, label) in targets(w, config.negative, &sampler, &mut rng) {
                    let out = &mut output[t * dim..(t + 1) * dim];
                    let g = (label - sigmoid(dot(v, out))) * lr;
                    for k in 0..dim {
                        err[k] += g * out[k];
                        out[k] += g * v[k];
                    }
                }
                for (x, e) in v.iter_mut().zip(&err) {
                    *x += e;
                }
            }
        }
    }

    let mut doc_vectors = BTreeMap::new();
    let mut sources = BTreeMap::new();
    for (((id, toks), d), v) in docs.iter().zip(&ids).zip(vecs) {
        let src = match (toks.is_empty(), d.is_empty()) {
            (true, _) => DocVecSource::Empty,
            (false, true) => DocVecSource::OutOfVocabulary,
            _ => DocVecSource::Trained,
        };
        if src.is_zero() {
            log::debug!("ticket {id}: no in-vocabulary tokens, zero doc vector");
        }
        if doc_vectors.insert(id.clone(), v).is_some() {
            return Err(Error::DuplicateTicket(id.clone()));
        }
        sources.insert(id.clone(), src);
    }
    let mut emb = DocEmbedding {
        format_version: EMBEDDING_FORMAT_VERSION,
        config: config.clone(),
        vocab,
        output,
        doc_vectors,
        sources,
        index: HashMap::new(),
    };
    emb.reindex();
    Ok(emb)
}

/// Fits a fresh document vector against the frozen output layer.
pub fn infer_docvec(model: &DocEmbedding, tokens: &TokenList, seed: u64) -> (Vec<f64>, DocVecSource) {
    let dim = model.dim();
    if tokens.is_empty() {
        return (vec![0.0; dim], DocVecSource::Empty);
    }
    let words = model.ids_of(tokens);
    if words.is_empty() {
        return (vec![0.0; dim], DocVecSource::OutOfVocabulary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / dim as f64;
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-bound..bound)).collect();
    let sampler = NegativeSampler::new(&model.vocab.counts);
    let steps = model.config.infer_steps.max(1);
    let mut err = vec![0.0; dim];
    for step in 0..steps {
        let lr = model.config.learning_rate * (1.0 - step as f64 / steps as f64).max(1e-4);
        for &w in &words {
            err.fill(0.0);
            for (t, label) in targets(w, model.config.negative, &sampler, &mut rng) {
                let out = &model.output[t * dim..(t + 1) * dim];
                let g = (label - sigmoid(dot(&v, out))) * lr;
                for k in 0..dim {
                    err[k] += g * out[k];
                }
            }
            for (x, e) in v.iter_mut().zip(&err) {
                *x += e;
            }
        }
    }
    (v, DocVecSource::Inferred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, s: &str) -> (String, TokenList) {
        (
            id.to_string(),
            TokenList {
                tokens: s.split_whitespace().map(String::from).collect(),
            },
        )
    }

    #[test]
    fn empty_ticket_gets_flagged_zero_vector() {
        let docs = vec![doc("1", "alpha beta"), doc("2", "")];
        let m = train_docvecs(&docs, &DocConfig::default()).unwrap();
        assert_eq!(m.vector("2").unwrap(), &[0.0; 20]);
        assert_eq!(m.source("2"), Some(DocVecSource::Empty));
        assert_eq!(m.source("1"), Some(DocVecSource::Trained));
    }

    #[test]
    fn inference_edge_cases() {
        let docs = vec![doc("1", "alpha beta gamma")];
        let m = train_docvecs(&docs, &DocConfig::default()).unwrap();
        let (v, s) = infer_docvec(&m, &TokenList::default(), 3);
        assert!(v.iter().all(|x| *x == 0.0));
        assert_eq!(s, DocVecSource::Empty);
        let (v, s) = infer_docvec(&m, &doc("", "zzz qqq").1, 3);
        assert!(v.iter().all(|x| *x == 0.0));
        assert_eq!(s, DocVecSource::OutOfVocabulary);
        let a = infer_docvec(&m, &doc("", "alpha gamma").1, 3);
        assert_eq!(a, infer_docvec(&m, &doc("", "alpha gamma").1, 3));
    }

    #[test]
    fn serde_round_trip_keeps_inference() {
        let docs = vec![doc("1", "alpha beta gamma"), doc("2", "gamma delta")];
        let m = train_docvecs(&docs, &DocConfig::default()).unwrap();
        let mut back: DocEmbedding = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back, m);
        let t = doc("", "beta delta").1;
        assert_eq!(infer_docvec(&back, &t, 5), infer_docvec(&m, &t, 5));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let docs = vec![doc("1", "a b"), doc("1", "c")];
        assert!(matches!(
            train_docvecs(&docs, &DocConfig::default()),
            Err(Error::DuplicateTicket(_))
        ));
    }
}
