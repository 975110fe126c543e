//! The feature registry and the extractors behind it.
//!
//! [`featurize`] turns one ticket into a [`FeatureVector`] laid out by a
//! [`FeatureRegistry`]; [`FeatureMatrix::build`] does it for a ticket set.

mod extract;
mod ngrams;
mod registry;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Ticket;
use crate::embeddings::{DocEmbedding, DocVecSource, WordEmbedding};
use crate::error::{Error, Result};
use crate::textprep::{tokenize_clean, TokenList};

pub use extract::{
    concept_features, count_features, count_features_text, keyphrase_flags, keyphrase_spans,
    metadata_features, percentile, wordvec_features, ConceptTargets, PhraseSpan,
};
pub(crate) use extract::percentile_sorted;
pub use ngrams::{candidate_grams, NgramVocabulary, NGRAM_MIN_SUPPORT};
pub use registry::{
    keyphrase_name, metadata_names, FeatureFamily, FeatureRegistry, FeatureSpec, AUTHOR_DOMAINS,
    CONCEPT_TARGETS, COUNT_NAMES, DOCVEC_DIM, KEY_PHRASES, REGISTRY_VERSION, STATUSES, WORDVEC_DIM,
};

/// Everything featurization reads. Immutable once built.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub registry: FeatureRegistry,
    pub pretrained: WordEmbedding,
    pub words: WordEmbedding,
    pub docs: DocEmbedding,
    pub ngrams: Option<NgramVocabulary>,
    targets: ConceptTargets,
}

impl FeatureContext {
    pub fn new(
        pretrained: WordEmbedding,
        words: WordEmbedding,
        docs: DocEmbedding,
        ngrams: Option<NgramVocabulary>,
    ) -> Result<Self> {
        let targets = ConceptTargets::new(&pretrained)?;
        if words.dim() != WORDVEC_DIM {
            return Err(Error::invalid(format!(
                "word embedding has dim {}, expected {WORDVEC_DIM}",
                words.dim()
            )));
        }
        if docs.dim() != DOCVEC_DIM {
            return Err(Error::invalid(format!(
                "doc embedding has dim {}, expected {DOCVEC_DIM}",
                docs.dim()
            )));
        }
        let registry = match &ngrams {
            Some(v) => FeatureRegistry::with_ngrams(&v.grams),
            None => FeatureRegistry::default(),
        };
        Ok(FeatureContext {
            registry,
            pretrained,
            words,
            docs,
            ngrams,
            targets,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ticket_id: String,
    pub values: Vec<f64>,
    pub docvec_source: DocVecSource,
}

pub fn featurize(ticket: &Ticket, ctx: &FeatureContext) -> FeatureVector {
    let text = ticket.free_text();
    featurize_text(ticket, &text, &tokenize_clean(&text), ctx)
}

fn featurize_text(ticket: &Ticket, text: &str, tokens: &TokenList, ctx: &FeatureContext) -> FeatureVector {
    let mut values = Vec::with_capacity(ctx.registry.len());
    values.extend(metadata_features(ticket));
    values.extend(count_features_text(text));
    values.extend(keyphrase_flags(text));
    if let Some(ng) = &ctx.ngrams {
        values.extend(ng.flags(tokens));
    }
    values.extend(concept_features(text, &ctx.pretrained, &ctx.targets));
    values.extend(wordvec_features(tokens, &ctx.words));
    let (doc, docvec_source) = ctx.docs.vector_or_infer(&ticket.id, tokens);
    values.extend(doc);
    debug_assert_eq!(values.len(), ctx.registry.len());
    FeatureVector {
        ticket_id: ticket.id.clone(),
        values,
        docvec_source,
    }
}

/// Feature rows for a ticket set, sorted by ticket id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub registry: FeatureRegistry,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub docvec_sources: Vec<DocVecSource>,
}

impl FeatureMatrix {
    pub fn build<'a>(tickets: impl IntoIterator<Item = &'a Ticket>, ctx: &FeatureContext) -> Self {
        let mut sorted: Vec<&Ticket> = tickets.into_iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let vectors: Vec<FeatureVector> = sorted.iter().map(|t| featurize(t, ctx)).collect();
        let mut m = FeatureMatrix {
            registry: ctx.registry.clone(),
            ids: Vec::with_capacity(vectors.len()),
            rows: Vec::with_capacity(vectors.len()),
            docvec_sources: Vec::with_capacity(vectors.len()),
        };
        for v in vectors {
            m.ids.push(v.ticket_id);
            m.rows.push(v.values);
            m.docvec_sources.push(v.docvec_source);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.registry.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.registry.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn row_index(&self) -> BTreeMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .binary_search_by(|x| x.as_str().cmp(id))
            .ok()
            .map(|i| self.rows[i].as_slice())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.registry.index_of(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Rows for `ids` in the given order; unknown ids are an error.
    pub fn select(&self, ids: &[&str]) -> Result<Vec<&[f64]>> {
        ids.iter()
            .map(|id| self.row(id).ok_or_else(|| Error::UnknownTicket(id.to_string())))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        let mut header = vec!["ticket_id".to_string()];
        header.extend(self.names());
        w.write_record(&header).map_err(csv_err)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
    }

    /// Reads what [`write_csv`](Self::write_csv) wrote. The CSV does not
    /// record how document vectors were obtained: all-zero ones read back as
    /// [`DocVecSource::Empty`], the rest as [`DocVecSource::Trained`].
    pub fn read_csv<R: std::io::Read>(input: R, origin: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if header.get(0) != Some("ticket_id") {
            return Err(parse_err(1, "first column must be ticket_id".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let registry = FeatureRegistry::from_names(&names)?;
        let docvec_cols: Vec<usize> = registry
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.family == FeatureFamily::Docvec)
            .map(|(j, _)| j)
            .collect();
        let mut pairs: Vec<(String, Vec<f64>)> = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != names.len() + 1 {
                return Err(parse_err(line, format!("expected {} fields, found {}", names.len() + 1, rec.len())));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(parse_err(line, format!("bad number {v:?}"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            pairs.push((rec[0].to_string(), row));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateTicket(w[0].0.clone()));
        }
        let mut m = FeatureMatrix {
            registry,
            ids: Vec::with_capacity(pairs.len()),
            rows: Vec::with_capacity(pairs.len()),
            docvec_sources: Vec::with_capacity(pairs.len()),
        };
        for (id, row) in pairs {
            let zero = docvec_cols.iter().all(|&j| row[j] == 0.0);
            m.docvec_sources.push(if zero { DocVecSource::Empty } else { DocVecSource::Trained });
            m.ids.push(id);
            m.rows.push(row);
        }
        Ok(m)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
