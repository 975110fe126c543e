//! One function per feature family.

use serde::{Deserialize, Serialize};

use super::registry::{AUTHOR_DOMAINS, CONCEPT_TARGETS, KEY_PHRASES, STATUSES, WORDVEC_DIM};
use crate::corpus::Ticket;
use crate::embeddings::{cosine, WordEmbedding};
use crate::error::{Error, Result};
use crate::textprep::{self, TokenList};

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn metadata_features(ticket: &Ticket) -> Vec<f64> {
    let domain = ticket
        .author_email
        .rsplit_once('@')
        .map(|(_, d)| d.to_ascii_lowercase());
    let mut out = Vec::with_capacity(19);
    for d in AUTHOR_DOMAINS {
        out.push(flag(domain.as_deref().is_some_and(|x| x.ends_with(d))));
    }
    out.push(flag(ticket.author_is_project_member));
    for p in 1..=3 {
        out.push(flag(ticket.priority == Some(p)));
    }
    let status = ticket.status.trim();
    for s in STATUSES {
        out.push(flag(status.eq_ignore_ascii_case(s)));
    }
    let ty = ticket.issue_type.to_lowercase();
    out.push(flag(ty.starts_with("bug")));
    out.push(flag(ty.starts_with("bug-")));
    out.push(flag(!ty.starts_with("bug")));
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

/// The nine count features of a free-text string.
pub fn count_features_text(text: &str) -> Vec<f64> {
    let sentences = textprep::split_sentences(text);
    let longest = sentences.iter().map(|s| s.chars().count()).max().unwrap_or(0);
    let no_html = textprep::strip_html(text);
    let words_no_html: Vec<&str> = no_html.split_whitespace().collect();
    let sentences_no_html = textprep::split_sentences(&no_html);
    let clean_per_sent: usize = sentences_no_html
        .iter()
        .map(|s| textprep::tokenize_clean(s).len())
        .sum();
    let words_per_sent: usize = sentences_no_html
        .iter()
        .map(|s| s.split_whitespace().count())
        .sum();
    vec![
        text.chars().count() as f64,
        longest as f64,
        median(words_no_html.iter().map(|w| w.chars().count() as f64).collect()),
        textprep::tokenize_clean(text).len() as f64,
        words_no_html.len() as f64,
        mean(clean_per_sent, sentences_no_html.len()),
        mean(words_per_sent, sentences_no_html.len()),
        sentences.len() as f64,
        textprep::count_sha1_hashes(text) as f64,
    ]
}

pub fn count_features(ticket: &Ticket) -> Vec<f64> {
    count_features_text(&ticket.free_text())
}

/// One 0/1 flag per key phrase: ASCII case-insensitive substring match.
pub fn keyphrase_flags(text: &str) -> Vec<f64> {
    let lower = text.to_ascii_lowercase();
    KEY_PHRASES.iter().map(|p| flag(lower.contains(p))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub phrase: String,
    /// Byte offsets into the text that was searched.
    pub start: usize,
    pub end: usize,
}

/// Every non-overlapping occurrence of every key phrase, ordered by start.
pub fn keyphrase_spans(text: &str) -> Vec<PhraseSpan> {
    // ASCII lowercasing keeps byte offsets aligned with `text`
    let lower = text.to_ascii_lowercase();
    let mut spans: Vec<PhraseSpan> = KEY_PHRASES
        .iter()
        .flat_map(|p| {
            lower.match_indices(p).map(|(start, _)| PhraseSpan {
                phrase: p.to_string(),
                start,
                end: start + p.len(),
            })
        })
        .collect();
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    spans
}

/// Target vectors looked up once; building this fails if a target is missing.
#[derive(Debug, Clone)]
pub struct ConceptTargets {
    vectors: Vec<Vec<f64>>,
}

impl ConceptTargets {
    pub fn new(pretrained: &WordEmbedding) -> Result<Self> {
        let vectors = CONCEPT_TARGETS
            .iter()
            .map(|t| {
                pretrained.vector(t).map(<[f64]>::to_vec).ok_or_else(|| {
                    Error::invalid(format!("concept target {t:?} missing from pretrained embedding"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(ConceptTargets { vectors })
    }
}

/// For each target, the best cosine between it and any distinct ticket word.
pub fn concept_features(text: &str, pretrained: &WordEmbedding, targets: &ConceptTargets) -> Vec<f64> {
    let words: Vec<&[f64]> = textprep::concept_words(text)
        .iter()
        .filter_map(|w| pretrained.vector(w))
        .collect();
    targets
        .vectors
        .iter()
        .map(|t| {
            words
                .iter()
                .map(|w| cosine(w, t))
                .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
                .unwrap_or(0.0)
        })
        .collect()
}

/// Linear interpolation between order statistics at h = q(n-1).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty list"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("percentile rank {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&v, q))
}

pub(crate) fn percentile_sorted(v: &[f64], q: f64) -> f64 {
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// 5th/95th percentiles per dimension, then of successive-row distances.
pub fn wordvec_features(tokens: &TokenList, words: &WordEmbedding) -> Vec<f64> {
    let dim = words.dim();
    let rows: Vec<&[f64]> = tokens.iter().filter_map(|t| words.vector(t)).collect();
    let mut out = vec![0.0; 2 * WORDVEC_DIM + 2];
    if rows.is_empty() {
        return out;
    }
    for d in 0..dim.min(WORDVEC_DIM) {
        let mut col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
        col.sort_by(f64::total_cmp);
        out[d] = percentile_sorted(&col, 0.05);
        out[WORDVEC_DIM + d] = percentile_sorted(&col, 0.95);
    }
    if rows.len() > 1 {
        let mut dists: Vec<f64> = rows
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(w[1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        dists.sort_by(f64::total_cmp);
        out[2 * WORDVEC_DIM] = percentile_sorted(&dists, 0.05);
        out[2 * WORDVEC_DIM + 1] = percentile_sorted(&dists, 0.95);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[5.0], 0.3).unwrap(), 5.0);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0], 0.95).unwrap() - 3.85).abs() < 1e-12);
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn count_examples() {
        let c = count_features_text("Fix it. Fix it again.");
        assert_eq!(c[7], 2.0);
        assert_eq!(c[0], 21.0);
        assert_eq!(count_features_text(""), vec![0.0; 9]);
        let sha = "0123456789abcdef0123456789abcdef01234567";
        assert_eq!(count_features_text(&format!("landed {sha}"))[8], 1.0);
    }

    #[test]
    fn keyphrase_examples() {
        let f = keyphrase_flags("this is technical debt");
        assert_eq!(f[0], 1.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
        assert_eq!(keyphrase_flags("inconsistency in naming")[9], 1.0);
        assert_eq!(keyphrase_flags("INCONSISTENT")[9], 1.0);
        assert_eq!(keyphrase_flags(""), vec![0.0; 25]);
    }

    #[test]
    fn spans_point_at_the_text() {
        let text = "A Hack. Then a CLEAN UP hack";
        let spans = keyphrase_spans(text);
        let got: Vec<&str> = spans.iter().map(|s| &text[s.start..s.end]).collect();
        assert_eq!(got, ["Hack", "CLEAN UP", "hack"]);
    }
}
