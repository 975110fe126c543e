//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner. Nothing here calls the code it is used to check.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use debtscan::corpus::{ingest_jsonl, Corpus};
use debtscan::corpus::synthetic::synthetic_pretrained_embedding;
use debtscan::features::{FeatureContext, FeatureMatrix};
use debtscan::gbm::TrainConfig;
use debtscan::pipeline::stages::{self, Embeddings};
use debtscan::pipeline::PipelineConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Porter vocabulary and expected stems, line by line.
pub fn porter_pairs() -> Vec<(String, String)> {
    let voc = std::fs::read_to_string(fixture("porter_voc.txt")).unwrap();
    let out = std::fs::read_to_string(fixture("porter_output.txt")).unwrap();
    let pairs: Vec<(String, String)> = voc
        .lines()
        .zip(out.lines())
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(pairs.len(), voc.lines().count());
    assert_eq!(pairs.len(), out.lines().count());
    pairs
}

/// The default layout, written out by hand.
pub fn expected_feature_names() -> Vec<String> {
    let mut v: Vec<String> = [
        "author_chromium_org",
        "author_gmail_com",
        "author_google_com",
        "author_etouch_net",
        "author_project_member",
        "priority_1",
        "priority_2",
        "priority_3",
        "status_WontFix",
        "status_Fixed",
        "status_Duplicate",
        "status_Verified",
        "status_Archived",
        "status_Assigned",
        "status_Available",
        "status_Untriaged",
        "type_starts_bug",
        "type_starts_bug_dash",
        "type_not_bug",
        "n_char",
        "n_char_longest_sentence",
        "median_chars_per_word_no_html",
        "n_word_clean",
        "n_word_no_html",
        "avg_nword_clean_per_sent",
        "avg_nword_no_html_per_sent",
        "n_sent",
        "n_sha1",
        "KEYPHRASE_debt",
        "KEYPHRASE_hack",
        "KEYPHRASE_workaround",
        "KEYPHRASE_cleanup",
        "KEYPHRASE_clean-up",
        "KEYPHRASE_clean_up",
        "KEYPHRASE_give_up",
        "KEYPHRASE_problematic",
        "KEYPHRASE_not_up_to_date",
        "KEYPHRASE_inconsisten",
        "KEYPHRASE_short_term",
        "KEYPHRASE_deviate",
        "KEYPHRASE_tweak",
        "KEYPHRASE_mess",
        "KEYPHRASE_buggy",
        "KEYPHRASE_complex",
        "KEYPHRASE_doesn't_work",
        "KEYPHRASE_out_of_date",
        "KEYPHRASE_insufficient",
        "KEYPHRASE_rework",
        "KEYPHRASE_remove",
        "KEYPHRASE_redesign",
        "KEYPHRASE_refactor",
        "KEYPHRASE_depend",
        "KEYPHRASE_structure",
        "CONCEPT_deviate",
        "CONCEPT_outdated",
        "CONCEPT_redundant",
        "CONCEPT_redesign",
        "CONCEPT_decouple",
        "CONCEPT_complicated",
        "CONCEPT_regret",
        "CONCEPT_corrupt",
        "CONCEPT_horrible",
        "CONCEPT_delay",
    ]
    .map(String::from)
    .to_vec();
    for q in [5, 95] {
        for d in 1..=10 {
            v.push(format!("wordvec_{d}_percentile_{q}"));
        }
    }
    v.push("seqdiff_percentile_5".into());
    v.push("seqdiff_percentile_95".into());
    for d in 1..=20 {
        v.push(format!("docvec_{d}"));
    }
    v
}

pub fn fixture_corpus() -> Corpus {
    let ingested = ingest_jsonl(fixture("tickets.jsonl")).unwrap();
    assert!(ingested.skipped.is_empty());
    ingested.corpus
}

/// Builds everything from scratch and featurizes the fixture corpus.
pub fn featurize_fixture() -> FeatureMatrix {
    let cfg = PipelineConfig::default();
    let corpus = fixture_corpus();
    let tokens = stages::tokenize_corpus(&corpus);
    let emb = Embeddings::train(&tokens, &cfg).unwrap();
    let ctx: FeatureContext = stages::build_context(synthetic_pretrained_embedding(100, cfg.seed), &emb, None).unwrap();
    FeatureMatrix::build(corpus.tickets(), &ctx)
}

// ---------------------------------------------------------------- gbm

/// Exhaustive split search. Candidate thresholds are the midpoints of
/// consecutive distinct values; gains are computed from per-side sums.
/// Returns `(feature, threshold, gain)` of the first strictly best split
/// in (feature, threshold) order, or `None` if no admissible split has
/// positive gain.
pub fn brute_best_split(
    rows: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    min_leaf: usize,
    lambda: f64,
) -> Option<(usize, f64, f64)> {
    let n_features = rows.first().map_or(0, Vec::len);
    let total_g: f64 = g.iter().sum();
    let total_h: f64 = h.iter().sum();
    let term = |g: f64, h: f64| g * g / (h + lambda);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..n_features {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0);
            for (i, r) in rows.iter().enumerate() {
                if r[f] <= t {
                    gl += g[i];
                    hl += h[i];
                    nl += 1;
                }
            }
            let nr = rows.len() - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let gain = 0.5 * (term(gl, hl) + term(total_g - gl, total_h - hl) - term(total_g, total_h));
            if best.is_none_or(|b| gain > b.2) {
                best = Some((f, t, gain));
            }
        }
    }
    best.filter(|b| b.2 > 0.0)
}

pub fn split_config(min_leaf: usize, lambda: f64) -> TrainConfig {
    TrainConfig {
        min_data_in_leaf: min_leaf,
        l2_reg: lambda,
        ..TrainConfig::default()
    }
}

// ---------------------------------------------------------------- metrics

/// O(n²) weighted AUROC over positive/negative pairs; ties count half.
pub fn brute_auroc(scores: &[f64], labels: &[f64], weights: &[f64]) -> Option<f64> {
    let (mut num, mut wp, mut wn) = (0.0, 0.0, 0.0);
    for i in 0..scores.len() {
        if labels[i] > 0.5 {
            wp += weights[i];
        } else {
            wn += weights[i];
        }
    }
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] > 0.5 && labels[j] <= 0.5 {
                let credit = if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
                num += weights[i] * weights[j] * credit;
            }
        }
    }
    (wp > 0.0 && wn > 0.0).then(|| num / (wp * wn))
}

/// `(accuracy, precision, recall)` from weighted confusion-matrix cells.
pub fn hand_metrics(
    scores: &[f64],
    labels: &[f64],
    weights: &[f64],
    threshold: f64,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    let (mut tp, mut fp, mut tn, mut fneg) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..scores.len() {
        let pred = scores[i] >= threshold;
        let truth = labels[i] > 0.5;
        let w = weights[i];
        match (pred, truth) {
            (true, true) => tp += w,
            (true, false) => fp += w,
            (false, false) => tn += w,
            (false, true) => fneg += w,
        }
    }
    let div = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    (div(tp + tn, tp + tn + fp + fneg), div(tp, tp + fp), div(tp, tp + fneg))
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

/// Every regular file under `dir`, relative path and contents, sorted.
pub fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
