use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REGISTRY_VERSION: &str = "v1-105";

/// In priority order; the keyphrase baseline queries a prefix of this list.
pub const KEY_PHRASES: [&str; 25] = [
    "debt",
    "hack",
    "workaround",
    "cleanup",
    "clean-up",
    "clean up",
    "give up",
    "problematic",
    "not up to date",
    "inconsisten",
    "short term",
    "deviate",
    "tweak",
    "mess",
    "buggy",
    "complex",
    "doesn't work",
    "out of date",
    "insufficient",
    "rework",
    "remove",
    "redesign",
    "refactor",
    "depend",
    "structure",
];

pub const CONCEPT_TARGETS: [&str; 10] = [
    "deviate",
    "outdated",
    "redundant",
    "redesign",
    "decouple",
    "complicated",
    "regret",
    "corrupt",
    "horrible",
    "delay",
];

pub const AUTHOR_DOMAINS: [&str; 4] = ["chromium.org", "gmail.com", "google.com", "etouch.net"];

pub const STATUSES: [&str; 8] = [
    "WontFix",
    "Fixed",
    "Duplicate",
    "Verified",
    "Archived",
    "Assigned",
    "Available",
    "Untriaged",
];

pub const COUNT_NAMES: [&str; 9] = [
    "n_char",
    "n_char_longest_sentence",
    "median_chars_per_word_no_html",
    "n_word_clean",
    "n_word_no_html",
    "avg_nword_clean_per_sent",
    "avg_nword_no_html_per_sent",
    "n_sent",
    "n_sha1",
];

pub const WORDVEC_DIM: usize = 10;
pub const DOCVEC_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Metadata,
    Count,
    Keyphrase,
    Ngram,
    Concept,
    Wordvec,
    Docvec,
}

impl FeatureFamily {
    pub fn is_flag(self) -> bool {
        matches!(self, FeatureFamily::Metadata | FeatureFamily::Keyphrase | FeatureFamily::Ngram)
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureFamily::Metadata => "metadata",
            FeatureFamily::Count => "counts",
            FeatureFamily::Keyphrase => "key phrases",
            FeatureFamily::Ngram => "n-grams",
            FeatureFamily::Concept => "concept words",
            FeatureFamily::Wordvec => "word vectors",
            FeatureFamily::Docvec => "document vectors",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub family: FeatureFamily,
}

/// Ordered, named feature layout. The order is part of the version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    pub version: String,
    pub features: Vec<FeatureSpec>,
}

pub fn keyphrase_name(phrase: &str) -> String {
    format!("KEYPHRASE_{}", phrase.replace(' ', "_"))
}

pub fn metadata_names() -> Vec<String> {
    let mut names: Vec<String> = AUTHOR_DOMAINS
        .iter()
        .map(|d| format!("author_{}", d.replace('.', "_")))
        .collect();
    names.push("author_project_member".into());
    names.extend((1..=3).map(|p| format!("priority_{p}")));
    names.extend(STATUSES.iter().map(|s| format!("status_{s}")));
    names.extend(["type_starts_bug", "type_starts_bug_dash", "type_not_bug"].map(String::from));
    names
}

impl Default for FeatureRegistry {
    /// The 105-feature layout without n-grams.
    fn default() -> Self {
        let mut features = Vec::with_capacity(105);
        let mut push = |name: String, family| features.push(FeatureSpec { name, family });
        for n in metadata_names() {
            push(n, FeatureFamily::Metadata);
        }
        for n in COUNT_NAMES {
            push(n.into(), FeatureFamily::Count);
        }
        for p in KEY_PHRASES {
            push(keyphrase_name(p), FeatureFamily::Keyphrase);
        }
        for t in CONCEPT_TARGETS {
            push(format!("CONCEPT_{t}"), FeatureFamily::Concept);
        }
        for q in [5, 95] {
            for d in 1..=WORDVEC_DIM {
                push(format!("wordvec_{d}_percentile_{q}"), FeatureFamily::Wordvec);
            }
        }
        push("seqdiff_percentile_5".into(), FeatureFamily::Wordvec);
        push("seqdiff_percentile_95".into(), FeatureFamily::Wordvec);
        for d in 1..=DOCVEC_DIM {
            push(format!("docvec_{d}"), FeatureFamily::Docvec);
        }
        FeatureRegistry {
            version: REGISTRY_VERSION.into(),
            features,
        }
    }
}

impl FeatureRegistry {
    /// Default layout with n-gram flags appended after the key phrases.
    pub fn with_ngrams(grams: &[String]) -> Self {
        let mut reg = FeatureRegistry::default();
        let at = reg
            .features
            .iter()
            .rposition(|f| f.family == FeatureFamily::Keyphrase)
            .map_or(0, |i| i + 1);
        let extra = grams.iter().map(|g| FeatureSpec {
            name: format!("NGRAM_{g}"),
            family: FeatureFamily::Ngram,
        });
        reg.features.splice(at..at, extra);
        reg.version = format!("{REGISTRY_VERSION}+ngram-{}", grams.len());
        reg
    }

    /// Recovers the layout from a list of column names (default layout,
    /// optionally with n-gram flags).
    pub fn from_names(names: &[String]) -> Result<Self> {
        let grams: Vec<String> = names
            .iter()
            .filter_map(|n| n.strip_prefix("NGRAM_").map(String::from))
            .collect();
        let reg = if grams.is_empty() {
            FeatureRegistry::default()
        } else {
            FeatureRegistry::with_ngrams(&grams)
        };
        reg.check_names(names)?;
        Ok(reg)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn family_of(&self, name: &str) -> Option<FeatureFamily> {
        self.features.iter().find(|f| f.name == name).map(|f| f.family)
    }

    /// Fails unless `names` is exactly this registry's layout.
    pub fn check_names(&self, names: &[String]) -> Result<()> {
        let same = names.len() == self.len()
            && names.iter().zip(&self.features).all(|(a, b)| *a == b.name);
        if same {
            Ok(())
        } else {
            Err(Error::RegistryMismatch {
                expected: self.version.clone(),
                actual: format!("{} columns", names.len()),
            })
        }
    }
}
