mod common;

use chrono::{TimeZone, Utc};
use debtscan::corpus::{Comment, Ticket};
use debtscan::embeddings::WordEmbedding;
use debtscan::features::{
    concept_features, count_features, keyphrase_spans, metadata_features, wordvec_features, ConceptTargets,
    FeatureFamily, FeatureMatrix, FeatureRegistry, CONCEPT_TARGETS, KEY_PHRASES,
};
use debtscan::textprep::TokenList;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ticket(title: &str, comments: &[&str]) -> Ticket {
    let at = Utc.timestamp_opt(1_400_000_000, 0).unwrap();
    Ticket {
        id: "1".into(),
        title: title.into(),
        description: String::new(),
        comments: comments
            .iter()
            .map(|c| Comment {
                author: "a@b.c".into(),
                posted_at: at,
                text: c.to_string(),
            })
            .collect(),
        author_email: "x@google.com".into(),
        author_is_project_member: true,
        priority: Some(1),
        status: "fixed".into(),
        issue_type: "Bug-Regression".into(),
        opened_at: at,
    }
}

#[test]
fn default_registry_is_the_documented_layout() {
    let reg = FeatureRegistry::default();
    let names: Vec<String> = reg.names().into_iter().map(String::from).collect();
    assert_eq!(names, common::expected_feature_names());
    assert_eq!(reg.index_of("wordvec_4_percentile_5"), Some(66));
    assert_eq!(FeatureRegistry::from_names(&names).unwrap(), reg);
    let mut shuffled = names.clone();
    shuffled.swap(0, 1);
    assert!(FeatureRegistry::from_names(&shuffled).is_err());
}

#[test]
fn metadata_rules() {
    let t = ticket("", &[]);
    let m = metadata_features(&t);
    let reg = FeatureRegistry::default();
    let get = |n: &str| m[reg.index_of(n).unwrap()];
    assert_eq!(get("author_google_com"), 1.0);
    assert_eq!(get("author_chromium_org"), 0.0);
    assert_eq!(get("author_project_member"), 1.0);
    assert_eq!(get("priority_1"), 1.0);
    assert_eq!(get("status_Fixed"), 1.0);
    assert_eq!(get("type_starts_bug"), 1.0);
    assert_eq!(get("type_starts_bug_dash"), 1.0);
    assert_eq!(get("type_not_bug"), 0.0);
    let none = metadata_features(&Ticket { priority: None, ..t });
    assert_eq!(&none[5..8], &[0.0; 3]);
}

#[test]
fn fixture_featurization_is_bit_identical_and_well_formed() {
    let a = common::featurize_fixture();
    let b = common::featurize_fixture();
    assert_eq!(a.ids, ["101", "102", "103", "104", "105", "106"]);
    let bits = |m: &FeatureMatrix| m.rows.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.docvec_sources, b.docvec_sources);

    let reg = &a.registry;
    for row in &a.rows {
        assert_eq!(row.len(), 105);
        for (x, spec) in row.iter().zip(&reg.features) {
            assert!(x.is_finite());
            if spec.family.is_flag() {
                assert!(*x == 0.0 || *x == 1.0, "{} = {x}", spec.name);
            }
            if spec.family == FeatureFamily::Concept {
                assert!((-1.0..=1.0).contains(x));
            }
        }
    }
    let debt = reg.index_of("KEYPHRASE_debt").unwrap();
    assert_eq!(a.row("102").unwrap()[debt], 1.0);
    let no_priority = a.row("103").unwrap();
    assert!(no_priority[5..8].iter().all(|x| *x == 0.0));
    assert_eq!(a.row("104").unwrap()[reg.index_of("n_sha1").unwrap()], 1.0);
}

#[test]
fn corpus_order_does_not_change_vectors() {
    let cfg = debtscan::pipeline::PipelineConfig::default();
    let corpus = common::fixture_corpus();
    let tokens = debtscan::pipeline::stages::tokenize_corpus(&corpus);
    let emb = debtscan::pipeline::stages::Embeddings::train(&tokens, &cfg).unwrap();
    let ctx = debtscan::pipeline::stages::build_context(
        debtscan::corpus::synthetic::synthetic_pretrained_embedding(100, 1),
        &emb,
        None,
    )
    .unwrap();
    let fwd = FeatureMatrix::build(corpus.tickets(), &ctx);
    let mut tickets: Vec<_> = corpus.tickets().collect();
    tickets.reverse();
    let rev = FeatureMatrix::build(tickets, &ctx);
    assert_eq!(fwd, rev);
}

#[test]
fn csv_round_trip() {
    let m = common::featurize_fixture();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let back = FeatureMatrix::read_csv(buf.as_slice(), std::path::Path::new("mem")).unwrap();
    assert_eq!(back.ids, m.ids);
    assert_eq!(back.registry, m.registry);
    assert_eq!(back.rows, m.rows);
}

fn random_embedding(words: &[&str], dim: usize, seed: u64) -> WordEmbedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = words
        .iter()
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    WordEmbedding::from_rows(words.iter().map(|w| w.to_string()).collect(), rows).unwrap()
}

fn oracle_cos(u: &[f64], v: &[f64]) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    d / (nu * nv)
}

#[test]
fn concept_values_match_direct_cosines() {
    let mut vocab: Vec<&str> = CONCEPT_TARGETS.to_vec();
    vocab.extend(["old", "code", "legacy", "video"]);
    let emb = random_embedding(&vocab, 8, 3);
    let targets = ConceptTargets::new(&emb).unwrap();

    let got = concept_features("The OLD code!", &emb, &targets);
    for (k, t) in CONCEPT_TARGETS.iter().enumerate() {
        let tv = emb.vector(t).unwrap();
        let want = ["old", "code"]
            .iter()
            .map(|w| oracle_cos(emb.vector(w).unwrap(), tv))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((got[k] - want).abs() < 1e-12, "{t}");
    }
    let outdated = CONCEPT_TARGETS.iter().position(|t| *t == "outdated").unwrap();
    assert!((concept_features("outdated docs", &emb, &targets)[outdated] - 1.0).abs() < 1e-12);
    assert_eq!(concept_features("nothing known here", &emb, &targets), vec![0.0; 10]);
}

fn oracle_percentile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (v.len() as f64 - 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - h.floor()) * (v[hi] - v[lo])
}

#[test]
fn wordvec_values_match_direct_percentiles() {
    let words = ["a", "b", "c", "d", "e", "f"];
    let emb = random_embedding(&words, 10, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(1..12);
        let toks: Vec<String> = (0..n).map(|_| words[rng.random_range(0..6)].to_string()).collect();
        let got = wordvec_features(&TokenList { tokens: toks.clone() }, &emb);
        let rows: Vec<&[f64]> = toks.iter().map(|t| emb.vector(t).unwrap()).collect();
        for d in 0..10 {
            let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
            assert!((got[d] - oracle_percentile(col.clone(), 0.05)).abs() < 1e-12);
            assert!((got[10 + d] - oracle_percentile(col, 0.95)).abs() < 1e-12);
        }
        if n > 1 {
            let dists: Vec<f64> = rows
                .windows(2)
                .map(|w| w[0].iter().zip(w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            assert!((got[20] - oracle_percentile(dists.clone(), 0.05)).abs() < 1e-12);
            assert!((got[21] - oracle_percentile(dists, 0.95)).abs() < 1e-12);
        } else {
            assert_eq!(&got[20..], &[0.0, 0.0]);
            let v = emb.vector(&toks[0]).unwrap();
            assert_eq!(&got[..10], v);
            assert_eq!(&got[10..20], v);
        }
    }
}

fn naive_occurrences(text: &str, phrase: &str) -> Vec<usize> {
    let t = text.as_bytes();
    let p = phrase.as_bytes();
    (0..t.len().saturating_sub(p.len() - 1))
        .filter(|&i| t[i..i + p.len()].eq_ignore_ascii_case(p))
        .collect()
}

proptest! {
    #[test]
    fn spans_match_substring_search(
        parts in prop::collection::vec(
            prop::sample::select(vec!["Debt", " hack", "clean up", "CLEANUP", "x", " ", "é", "mess", "Doesn't Work", "structure"]),
            0..20,
        )
    ) {
        let text = parts.concat();
        let spans = keyphrase_spans(&text);
        for p in KEY_PHRASES {
            let ours: Vec<usize> = spans.iter().filter(|s| s.phrase == p).map(|s| s.start).collect();
            let theirs = naive_occurrences(&text, p);
            // non-overlapping occurrences of the phrase itself
            let mut expect = Vec::new();
            for i in theirs {
                if expect.last().is_none_or(|&j: &usize| i >= j + p.len()) {
                    expect.push(i);
                }
            }
            prop_assert_eq!(ours, expect, "{}", p);
        }
        for s in &spans {
            prop_assert!(text[s.start..s.end].eq_ignore_ascii_case(&s.phrase));
        }
    }

    #[test]
    fn appending_a_comment_never_shrinks_counts(
        base in "[a-zA-Z .!?]{0,80}",
        extra in "[a-zA-Z .!?]{0,80}",
    ) {
        let before = count_features(&ticket(&base, &["first comment."]));
        let after = count_features(&ticket(&base, &["first comment.", &extra]));
        prop_assert!(after[0] >= before[0]);
        prop_assert!(after[7] >= before[7]);
    }
}
