use std::collections::HashSet;
use std::sync::OnceLock;

/// Version tag of the bundled list; bump when `data/stopwords_en.txt` changes.
pub const STOPWORDS_VERSION: &str = "en-snowball+smart-1";

const BUNDLED: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// Parses one word per line; `#` starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        StopWords { words }
    }

    pub fn bundled() -> &'static StopWords {
        static LIST: OnceLock<StopWords> = OnceLock::new();
        LIST.get_or_init(|| StopWords::parse(BUNDLED))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The words in unspecified order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}
