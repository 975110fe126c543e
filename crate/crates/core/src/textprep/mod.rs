//! Text normalization shared by the feature extractors.
//!
//! Everything here is a pure function of its input. The cleaning pipeline in
//! [`tokenize_clean`] runs lowercase, URL removal, removal of non-letter
//! characters, stop-word removal and Porter stemming, in that order.

mod porter;
mod stopwords;

pub use porter::stem;
pub use stopwords::{StopWords, STOPWORDS_VERSION};

/// Lowercase stemmed word tokens produced by [`tokenize_clean`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenList {
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

const ENTITIES: [(&str, char); 5] = [
    ("&amp;", '&'),
    ("&lt;", '<'),
    ("&gt;", '>'),
    ("&quot;", '"'),
    ("&#39;", '\''),
];

fn strip_html_once(text: &str) -> String {
    let mut tagless = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        tagless.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find(['<', '>']) {
            Some(end) if after.as_bytes()[end] == b'>' => rest = &after[end + 1..],
            _ => {
                tagless.push('<');
                rest = after;
            }
        }
    }
    tagless.push_str(rest);

    let mut out = String::with_capacity(tagless.len());
    let mut rest = tagless.as_str();
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        match ENTITIES.iter().find(|(name, _)| tail.starts_with(name)) {
            Some((name, ch)) => {
                out.push(*ch);
                rest = &tail[name.len()..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Removes `<...>` tags and decodes the five basic HTML entities.
///
/// Applied until the text stops changing, so decoded entities that form new
/// tags are removed too and the function is idempotent. A `<` with no closing
/// `>` before the next `<` is kept literally.
pub fn strip_html(text: &str) -> String {
    let mut current = text.to_string();
    loop {
        let next = strip_html_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Splits on `.`, `!`, `?` and newlines, dropping fragments that are empty
/// after trimming.
pub fn split_sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Counts maximal runs of exactly 40 hexadecimal characters.
pub fn count_sha1_hashes(text: &str) -> usize {
    let mut count = 0;
    let mut run = 0usize;
    for b in text.bytes().chain(std::iter::once(b' ')) {
        if b.is_ascii_hexdigit() {
            run += 1;
        } else {
            if run == 40 {
                count += 1;
            }
            run = 0;
        }
    }
    count
}

fn is_url(chunk: &str) -> bool {
    if chunk.starts_with("www.") {
        return true;
    }
    match chunk.find("://") {
        Some(pos) if pos > 0 => {
            let scheme = &chunk[..pos];
            scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-'))
        }
        _ => false,
    }
}

/// Lowercased word tokens with URLs and every non-letter character removed.
///
/// Words are maximal runs of `a-z`, joined across internal apostrophes so
/// that contractions such as `doesn't` survive as one token. The apostrophe
/// form is what stop-word lookups see; [`clean_words`] strips it afterwards.
fn raw_words(text: &str) -> Vec<String> {
    let lower = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let mut words = Vec::new();
    for chunk in lower.split_whitespace() {
        if is_url(chunk) {
            continue;
        }
        let bytes = chunk.as_bytes();
        let mut current = String::new();
        for (i, &b) in bytes.iter().enumerate() {
            if b.is_ascii_lowercase() {
                current.push(b as char);
            } else if b == b'\''
                && !current.is_empty()
                && bytes.get(i + 1).is_some_and(|n| n.is_ascii_lowercase())
            {
                current.push('\'');
            } else if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Unstemmed cleaned words: the [`tokenize_clean`] pipeline without the
/// final stemming step.
pub fn clean_words(text: &str, stopwords: &StopWords) -> Vec<String> {
    raw_words(text)
        .into_iter()
        .filter(|w| !stopwords.contains(w))
        .map(|w| w.replace('\'', ""))
        .filter(|w| !stopwords.contains(w))
        .collect()
}

/// Distinct lowercased, letters-only, unstemmed words in first-seen order,
/// stop words kept. Used for lookups in a general-purpose embedding, whose
/// vocabulary has no stems and includes common words such as "old".
pub fn concept_words(text: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    raw_words(text)
        .into_iter()
        .map(|w| w.replace('\'', ""))
        .filter(|w| seen.insert(w.clone()))
        .collect()
}

/// The full cleaning pipeline with the bundled stop-word list.
pub fn tokenize_clean(text: &str) -> TokenList {
    tokenize_clean_with(text, StopWords::bundled())
}

pub fn tokenize_clean_with(text: &str, stopwords: &StopWords) -> TokenList {
    TokenList {
        tokens: clean_words(text, stopwords)
            .iter()
            .map(|w| stem(w))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strip_html_examples() {
        assert_eq!(strip_html("a <b>bold</b> fix"), "a bold fix");
        assert_eq!(strip_html("x &lt; y"), "x < y");
        assert_eq!(strip_html("if a < b then"), "if a < b then");
        assert_eq!(strip_html("&amp;lt;b&amp;gt;x"), "x");
        assert_eq!(strip_html("R&D &#39;q&#39; &quot;z&quot;"), "R&D 'q' \"z\"");
    }

    #[test]
    fn split_sentences_examples() {
        assert_eq!(split_sentences("A. B! C?"), vec!["A", "B", "C"]);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("one\ntwo"), vec!["one", "two"]);
        assert_eq!(split_sentences("...  \n\n"), Vec::<&str>::new());
    }

    #[test]
    fn sha1_counts() {
        let h = "0123456789abcdef0123456789abcdef01234567";
        assert_eq!(count_sha1_hashes(h), 1);
        assert_eq!(count_sha1_hashes(&format!("commit {h}, reverted")), 1);
        assert_eq!(count_sha1_hashes("deadbeef"), 0);
        assert_eq!(count_sha1_hashes(&format!("{h}a")), 0);
        assert_eq!(count_sha1_hashes(&format!("{h} {}", h.to_uppercase())), 2);
    }

    #[test]
    fn tokenize_examples() {
        let toks = tokenize_clean("Refactoring the APIs, 3 times!");
        assert_eq!(toks.tokens, vec!["refactor", "api", "time"]);
        assert!(tokenize_clean("").is_empty());
        let toks = tokenize_clean("see https://x.y/z then retry");
        assert_eq!(toks.tokens, vec![stem("retry")]);
        assert_eq!(toks.tokens, vec!["retri"]);
    }

    #[test]
    fn urls_and_hyphens() {
        let toks = tokenize_clean("visit www.example.com or ftp://host/file; clean-up crashes");
        assert_eq!(toks.tokens, vec!["visit", "clean", "crash"]);
    }

    #[test]
    fn contractions_hit_the_stop_list() {
        let toks = tokenize_clean("It doesn't work; the author's patch");
        assert_eq!(toks.tokens, vec!["work", "author", "patch"]);
    }

    proptest! {
        #[test]
        fn strip_html_is_idempotent(t in "[a-z<>&;#39 ltgampquo/]{0,40}") {
            let once = strip_html(&t);
            prop_assert_eq!(strip_html(&once), once);
        }

        #[test]
        fn clean_words_are_letters_and_not_stop_words(t in "\\PC{0,80}") {
            let stop = StopWords::bundled();
            for w in clean_words(&t, stop) {
                prop_assert!(!w.is_empty());
                prop_assert!(w.bytes().all(|b| b.is_ascii_lowercase()));
                prop_assert!(!stop.contains(&w));
            }
            for tok in tokenize_clean(&t).tokens {
                prop_assert!(!tok.is_empty() && tok.bytes().all(|b| b.is_ascii_lowercase()));
            }
        }

        #[test]
        fn sentence_lengths_bounded(t in "[a-z .!?\n]{0,60}") {
            let total: usize = split_sentences(&t).iter().map(|s| s.len()).sum();
            prop_assert!(total <= t.len());
        }
    }
}
