use chrono::{TimeZone, Utc};
use debtscan::corpus::synthetic::{generate_synthetic_corpus, SyntheticConfig};
use debtscan::corpus::{read_jsonl, Corpus, LabelJournal, LabelRecord, RubricPath};
use proptest::prelude::*;
use std::path::Path;

fn generated(n: usize, seed: u64) -> Corpus {
    generate_synthetic_corpus(&SyntheticConfig {
        n_tickets: n,
        td_rate: 0.3,
        seed,
    })
    .unwrap()
    .0
}

#[test]
fn ingest_of_serialized_corpus_is_identity() {
    let c = generated(200, 3);
    let text = c.to_jsonl_string();
    let back = read_jsonl(text.as_bytes(), Path::new("mem")).unwrap();
    assert!(back.skipped.is_empty());
    assert_eq!(back.corpus.len(), c.len());
    for (a, b) in c.tickets().zip(back.corpus.tickets()) {
        assert_eq!(a, b);
        assert_eq!(a.free_text(), b.free_text());
    }
}

#[test]
fn free_text_length_is_parts_plus_separators() {
    for t in generated(100, 4).tickets() {
        let parts = 2 + t.comments.len();
        let expect = t.title.chars().count()
            + t.description.chars().count()
            + t.comments.iter().map(|c| c.text.chars().count()).sum::<usize>()
            + parts
            - 1;
        assert_eq!(t.free_text().chars().count(), expect);
    }
}

#[test]
fn truncated_line_is_skipped_not_fatal() {
    let c = generated(3, 5);
    let text = c.to_jsonl_string();
    let mut lines: Vec<&str> = text.lines().collect();
    let cut = &lines[2][..lines[2].len() / 2];
    lines[2] = cut;
    let got = read_jsonl(lines.join("\n").as_bytes(), Path::new("mem")).unwrap();
    assert_eq!(got.corpus.len(), 2);
    assert_eq!(got.skipped.len(), 1);
    assert_eq!(got.skipped[0].line, 3);
}

fn record(id: &str, rater: &str, label: f64, at: i64) -> LabelRecord {
    LabelRecord {
        ticket_id: id.into(),
        label,
        rater: rater.into(),
        labeled_at: Utc.timestamp_opt(1_500_000_000 + at, 0).unwrap(),
        rubric_path: RubricPath::default(),
        notes: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn journal_replay_reproduces_active_labels(
        ops in prop::collection::vec((0usize..6, 0usize..3, 0u8..=10), 1..40)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        let mut live = generated(6, 9);
        let ids: Vec<String> = live.ids().map(String::from).collect();
        let mut journal = LabelJournal::open(&path).unwrap();
        for (k, (t, r, y)) in ops.iter().enumerate() {
            let rec = record(&ids[*t], ["a", "b", "c"][*r], *y as f64 / 10.0, k as i64);
            journal.upsert(&mut live, rec).unwrap();
        }
        drop(journal);
        let mut fresh = generated(6, 9);
        LabelJournal::replay(&path, &mut fresh).unwrap();
        prop_assert_eq!(fresh.active_labels(), live.active_labels());
        prop_assert_eq!(fresh.aggregated_labels(), live.aggregated_labels());
        // At most one active record per (ticket, rater).
        let mut keys: Vec<(&str, &str)> = live
            .active_labels()
            .iter()
            .map(|r| (r.ticket_id.as_str(), r.rater.as_str()))
            .collect();
        let n = keys.len();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
    }
}
