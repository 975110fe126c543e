mod common;

use debtscan::textprep::{split_sentences, stem, strip_html, tokenize_clean, StopWords};
use proptest::prelude::*;

#[test]
fn porter_fixture_matches_exactly() {
    let pairs = common::porter_pairs();
    assert_eq!(pairs.len(), 23_531);
    let misses: Vec<_> = pairs.iter().filter(|(w, s)| stem(w) != *s).take(10).collect();
    assert!(misses.is_empty(), "{misses:?}");
}

#[test]
fn restemming_fixture_outputs_moves_a_known_few() {
    // Porter is not idempotent ("abase" -> "abas" -> "aba"); pin how often a
    // second pass changes the published outputs.
    let pairs = common::porter_pairs();
    let moved: Vec<&str> = pairs
        .iter()
        .map(|(_, s)| s.as_str())
        .filter(|s| stem(s) != *s)
        .collect();
    assert_eq!(moved.len(), 785);
    assert_eq!(stem("abas"), "aba");
}

#[test]
fn tokenize_matches_porter_on_surviving_words() {
    let toks = tokenize_clean("Refactoring the APIs, 3 times!");
    let expect: Vec<String> = ["refactoring", "apis", "times"].iter().map(|w| stem(w)).collect();
    assert_eq!(toks.tokens, expect);
    assert_eq!(toks.tokens, ["refactor", "api", "time"]);

    let toks = tokenize_clean("see https://x.y/z then retry");
    assert_eq!(toks.tokens, [stem("retry")]);
    assert!(tokenize_clean("").is_empty());
}

fn text() -> impl Strategy<Value = String> {
    let atoms = prop::sample::select(vec![
        "the", "Debt", "<b>", "</b>", "&amp;", "&lt;", "&gt;", "&quot;", "&#39;", "don't", "x86", ". ", "! ",
        "\n", " ", "refactoring", "Hack", "3", "a-b", "<i >", "&", "<", ">", "é",
    ]);
    prop::collection::vec(atoms, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn strip_html_is_idempotent(t in text()) {
        let once = strip_html(&t);
        prop_assert_eq!(strip_html(&once), once);
    }

    #[test]
    fn clean_tokens_are_lowercase_letters(t in text()) {
        for tok in tokenize_clean(&t).iter() {
            prop_assert!(!tok.is_empty());
            prop_assert!(tok.chars().all(|c| c.is_ascii_lowercase()), "{tok:?}");
        }
    }

    #[test]
    fn sentences_never_outgrow_the_text(t in text()) {
        let total: usize = split_sentences(&t).iter().map(|s| s.len()).sum();
        prop_assert!(total <= t.len());
    }
}

#[test]
fn bundled_stop_words_never_survive_cleaning() {
    let stop = StopWords::bundled();
    let text = stop.words().collect::<Vec<_>>().join(" ");
    let cleaned = debtscan::textprep::clean_words(&text, stop);
    assert!(cleaned.is_empty(), "{:?}", &cleaned[..cleaned.len().min(5)]);
}
