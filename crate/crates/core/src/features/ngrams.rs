use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::textprep::TokenList;

/// Minimum number of labeled tickets that must contain, and must lack, a gram.
pub const NGRAM_MIN_SUPPORT: usize = 3;

/// Distinct 1-, 2- and 3-grams of a token list, joined with `_`.
pub fn candidate_grams(tokens: &TokenList, n_max: usize) -> BTreeSet<String> {
    let t = &tokens.tokens;
    let mut grams = BTreeSet::new();
    for n in 1..=n_max {
        for w in t.windows(n) {
            grams.insert(w.join("_"));
        }
    }
    grams
}

/// The n-grams kept after the rarity and ubiquity filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramVocabulary {
    pub n_max: usize,
    pub grams: Vec<String>,
}

impl NgramVocabulary {
    pub fn fit(labeled: &[&TokenList], n_max: usize) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for t in labeled {
            for g in candidate_grams(t, n_max) {
                *df.entry(g).or_default() += 1;
            }
        }
        let n = labeled.len();
        let grams = df
            .into_iter()
            .filter(|&(_, c)| c >= NGRAM_MIN_SUPPORT && n - c >= NGRAM_MIN_SUPPORT)
            .map(|(g, _)| g)
            .collect();
        NgramVocabulary { n_max, grams }
    }

    pub fn flags(&self, tokens: &TokenList) -> Vec<f64> {
        let present = candidate_grams(tokens, self.n_max);
        self.grams
            .iter()
            .map(|g| if present.contains(g) { 1.0 } else { 0.0 })
            .collect()
    }
}
