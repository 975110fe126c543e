use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Frequency-ranked vocabulary: most frequent first, ties in byte order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
}

impl Vocab {
    pub fn build<'a, I, S>(streams: I, max_size: usize) -> Vocab
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for stream in streams {
            for tok in stream {
                *freq.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);
        Vocab {
            words: ranked.iter().map(|(w, _)| w.to_string()).collect(),
            counts: ranked.iter().map(|(_, c)| *c).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect()
    }
}

/// Draws word ids with probability proportional to count^0.75.
#[derive(Debug, Clone)]
pub(crate) struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// -ln σ(x), computed without overflow.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}
