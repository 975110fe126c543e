//! The individual steps `run_end_to_end` chains; the CLI calls them one at a
//! time.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::corpus::synthetic::{generate_synthetic_corpus, synthetic_pretrained_embedding, GroundTruth};
use crate::corpus::{ingest_jsonl, Corpus, LabelJournal, LabelRecord};
use crate::embeddings::{load_pretrained, train_cbow, train_docvecs, DocEmbedding, TrainedWords, WordEmbedding};
use crate::error::{Error, Result};
use crate::features::{FeatureContext, NgramVocabulary, CONCEPT_TARGETS};
use crate::textprep::{concept_words, tokenize_clean, TokenList};

/// Corpus plus labels, and the ground truth when the corpus is synthetic.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub truth: Option<GroundTruth>,
}

pub fn load_corpus(config: &PipelineConfig) -> Result<Inputs> {
    let (mut corpus, truth) = match &config.paths.corpus {
        Some(path) => {
            let ingested = ingest_jsonl(path)?;
            for s in &ingested.skipped {
                log::warn!("skipped {}:{}: {}", path.display(), s.line, s.reason);
            }
            (ingested.corpus, None)
        }
        None => {
            let (c, t) = generate_synthetic_corpus(&config.synthetic_config())?;
            (c, Some(t))
        }
    };
    if let Some(path) = &config.paths.labels {
        let n = LabelJournal::replay(path, &mut corpus)?;
        log::info!("replayed {n} label records from {}", path.display());
    }
    Ok(Inputs { corpus, truth })
}

/// The pretrained embedding, restricted to words the corpus can use, or the
/// synthetic stand-in when no file is configured.
pub fn load_pretrained_for(config: &PipelineConfig, corpus: &Corpus) -> Result<WordEmbedding> {
    let dim = config.features.pretrained_dim;
    match &config.paths.pretrained {
        Some(path) => {
            let mut words: HashSet<String> = CONCEPT_TARGETS.iter().map(|s| s.to_string()).collect();
            for t in corpus.tickets() {
                words.extend(concept_words(&t.free_text()));
            }
            load_pretrained(path, dim, Some(&words))
        }
        None => Ok(synthetic_pretrained_embedding(dim, config.seed)),
    }
}

/// Cleaned tokens of every ticket, in id order.
pub fn tokenize_corpus(corpus: &Corpus) -> Vec<(String, TokenList)> {
    corpus
        .tickets()
        .map(|t| (t.id.clone(), tokenize_clean(&t.free_text())))
        .collect()
}

/// The two embeddings trained on corpus text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    pub words: TrainedWords,
    pub docs: DocEmbedding,
}

pub const WORDS_FILE: &str = "word_embedding.json";
pub const DOCS_FILE: &str = "doc_embedding.json";

impl Embeddings {
    pub fn train(tokens: &[(String, TokenList)], config: &PipelineConfig) -> Result<Self> {
        let streams: Vec<TokenList> = tokens.iter().map(|(_, t)| t.clone()).collect();
        let words = train_cbow(&streams, &config.cbow_config())?;
        let docs = train_docvecs(tokens, &config.doc_config())?;
        Ok(Embeddings { words, docs })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(WORDS_FILE), &self.words)?;
        write_json(&dir.join(DOCS_FILE), &self.docs)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let words: TrainedWords = read_json(&dir.join(WORDS_FILE))?;
        let mut docs: DocEmbedding = read_json(&dir.join(DOCS_FILE))?;
        docs.reindex();
        Ok(Embeddings { words, docs })
    }
}

pub fn build_context(
    pretrained: WordEmbedding,
    embeddings: &Embeddings,
    ngrams: Option<NgramVocabulary>,
) -> Result<FeatureContext> {
    FeatureContext::new(
        pretrained,
        embeddings.words.embedding.clone(),
        embeddings.docs.clone(),
        ngrams,
    )
}

/// N-gram vocabulary fitted only on the given (training) tickets.
pub fn fit_ngrams(tokens: &[(String, TokenList)], train_ids: &BTreeSet<String>) -> NgramVocabulary {
    let lists: Vec<&TokenList> = tokens
        .iter()
        .filter(|(id, _)| train_ids.contains(id))
        .map(|(_, t)| t)
        .collect();
    NgramVocabulary::fit(&lists, 3)
}

/// Labeled tickets split by labeling time: the latest `fraction` of them
/// are held out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train: Vec<String>,
    pub holdout: Vec<String>,
}

pub fn split_holdout(labels_in_time_order: &[&LabelRecord], fraction: f64) -> Result<HoldoutSplit> {
    let n = labels_in_time_order.len();
    let n_hold = (fraction * n as f64).round() as usize;
    if n_hold == 0 || n_hold >= n {
        return Err(Error::invalid(format!(
            "holdout fraction {fraction} leaves no train or no holdout tickets out of {n}"
        )));
    }
    let mut train: Vec<String> = labels_in_time_order[..n - n_hold]
        .iter()
        .map(|r| r.ticket_id.clone())
        .collect();
    let mut holdout: Vec<String> = labels_in_time_order[n - n_hold..]
        .iter()
        .map(|r| r.ticket_id.clone())
        .collect();
    train.sort();
    holdout.sort();
    let split = HoldoutSplit { train, holdout };
    split.check_disjoint()?;
    Ok(split)
}

impl HoldoutSplit {
    pub fn check_disjoint(&self) -> Result<()> {
        let train: BTreeSet<&String> = self.train.iter().collect();
        match self.holdout.iter().find(|id| train.contains(id)) {
            Some(id) => Err(Error::invalid(format!("ticket {id} is in both train and holdout"))),
            None => Ok(()),
        }
    }
}

/// One label per labeled ticket, keyed by id.
pub fn label_map(corpus: &Corpus) -> BTreeMap<String, f64> {
    corpus
        .aggregated_labels()
        .into_iter()
        .map(|(id, r)| (id.to_string(), r.label))
        .collect()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
