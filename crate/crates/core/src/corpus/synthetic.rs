//! Seeded generator for synthetic tracker corpora with known ground truth.
//!
//! Tickets that discuss technical debt get longer multi-comment design
//! threads. Some of them use phrases from the key-phrase list, others only
//! paraphrase the problem in words that match none of the phrases. Ordinary
//! bug reports occasionally use key phrases innocently ("as a workaround,
//! restart the browser") so that phrase matching alone is imperfect.

use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Comment, Corpus, Ticket};
use crate::embeddings::WordEmbedding;
use crate::error::{Error, Result};
use crate::features::CONCEPT_TARGETS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_tickets: usize,
    pub td_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tickets: 5000,
            td_rate: 0.16,
            seed: 7,
        }
    }
}

/// Ticket id -> 1 for technical-debt tickets, 0 otherwise.
pub type GroundTruth = BTreeMap<String, u8>;

const COMPONENTS: &[&str] = &[
    "compositor",
    "renderer",
    "net stack",
    "sync service",
    "extension system",
    "omnibox",
    "download manager",
    "media pipeline",
    "gpu process",
    "tab strip",
    "password manager",
    "print preview",
    "devtools frontend",
    "autofill",
    "bookmark model",
    "cookie store",
    "bindings generator",
    "ipc layer",
    "sandbox policy",
    "updater",
];

const FEATURES: &[&str] = &[
    "video player",
    "login form",
    "scrollbar",
    "context menu",
    "tooltip",
    "font rendering",
    "pdf viewer",
    "address bar",
    "new tab page",
    "fullscreen mode",
    "spell checker",
    "zoom level",
    "popup blocker",
    "file picker",
    "audio output",
    "webcam preview",
    "touchpad scrolling",
    "dark theme",
    "print dialog",
    "history page",
];

const ACTIONS: &[&str] = &[
    "click the button",
    "resize the window",
    "scroll quickly",
    "open a new tab",
    "drag a file onto the page",
    "press ctrl+t",
    "switch users",
    "plug in a second monitor",
    "restart the browser",
    "type in the search box",
];

const FAILURES: &[&str] = &[
    "crashes",
    "hangs",
    "renders blank",
    "flickers",
    "shows garbage",
    "freezes for several seconds",
    "loses focus",
    "stops responding",
];

const VERBS: &[&str] = &["load", "render", "play", "respond", "open", "save"];

const PLATFORMS: &[&str] = &["Windows 7", "Mac OS X", "Ubuntu", "ChromeOS", "Android"];

const NEUTRAL: &[&str] = &[
    "Steps to reproduce: open a page with the {f} and {a}.",
    "Expected the {f} to {v}, but it {x}.",
    "Reproduced on version {ver} on {os}.",
    "The browser {x} when I {a}.",
    "Attached a screenshot of the {f}.",
    "Thanks for the report, assigning to the {c} owners.",
    "Cannot reproduce on the latest canary build.",
    "Happens every time I {a} on {os}.",
    "Verified fixed in {ver}.",
    "Works for me on {os} with version {ver}.",
    "Bisected to a range of about twenty revisions.",
    "Please attach the crash id from the about page.",
    "The {f} {x} after the last update.",
    "Only happens with hardware acceleration enabled.",
];

const PROCESS: &[&str] = &[
    "Patch uploaded for review.",
    "Landed in r{n}.",
    "LGTM with nits.",
    "Fixed in commit {sha}.",
    "Merged to the beta branch.",
    "Status update: still working on this.",
    "cc'ing the {c} owners.",
];

/// Sentences containing one of the first twelve key phrases, by phrase.
const TD_EXPLICIT_EARLY: &[&str] = &[
    "This is technical debt in the {c} that we keep paying interest on.",
    "The current {c} code is a hack that was meant to be temporary.",
    "We added a workaround in the {c} until the {c2} is fixed properly.",
    "A follow-up cleanup is needed for the {c} once this lands.",
    "This needs a clean-up of how the {c} talks to the {c2}.",
    "We should clean up the {c} interfaces after the branch point.",
    "We had to give up on sharing the {c} abstraction for now.",
    "The ownership model of the {c} is problematic.",
    "The {c} design notes are not up to date with the code.",
    "Naming across the {c} and the {c2} is inconsistent.",
    "This was a short term fix and the {c} needs a proper solution.",
    "The implementation starts to deviate from the original {c} design.",
];

/// Sentences containing one of the later key phrases.
const TD_EXPLICIT_LATE: &[&str] = &[
    "We keep having to tweak the {c} for every new platform.",
    "The {c} code is a mess of special cases.",
    "The {c} glue is buggy whenever the {c2} changes.",
    "Initialization of the {c} is far too complex.",
    "The fallback path in the {c} doesn't work with the {c2}.",
    "Half of the {c} comments are out of date.",
    "The test coverage of the {c} is insufficient for this change.",
    "The {c} will need a rework before we can ship the {c2} changes.",
    "We should remove the duplicated {c} paths.",
    "Eventually we should redesign the {c}.",
    "We need to refactor the {c} so the {c2} stops reaching into it.",
    "Too many modules depend on {c} internals.",
    "The {c} code structure makes this hard to follow.",
];

/// Technical-debt discussion that matches none of the key phrases.
const TD_PARAPHRASE: &[&str] = &[
    "The {c} has grown duplicated logic that is hard to maintain.",
    "Ownership of the {c} is unclear and the layering is tangled.",
    "Legacy {c} code paths are kept only for compatibility.",
    "We copied the {c} logic into the {c2}, which will bite us later.",
    "The abstraction between the {c} and the {c2} leaks implementation details.",
    "This coupling makes every change to the {c} ripple into the {c2}.",
    "We should consolidate the two {c} implementations.",
    "The {c} interface is brittle and convoluted.",
    "Longer term the {c} needs to be decoupled from the {c2}.",
    "Boilerplate in the {c} keeps growing with every feature.",
    "The old {c} path is obsolete but still compiled in.",
    "This stopgap in the {c} was never revisited.",
    "Maintaining two copies of the {c} configuration is costly.",
    "The {c} layering was bypassed to hit the deadline and it shows.",
    "Every new caller has to know the undocumented {c} invariants.",
    "We postponed the migration of the {c} again, so the shim stays.",
];

/// Innocent uses of early key phrases in ordinary bug reports.
const INNOCENT_EARLY: &[&str] = &[
    "As a workaround, restarting the browser helps.",
    "I give up trying to reproduce this on {os}.",
    "Please cleanup the profile directory and retry.",
    "The {f} looks inconsistent between tabs.",
    "Clean up the cache and try again.",
];

const INNOCENT_LATE: &[&str] = &[
    "Remove the extension and try again.",
    "The error message says the file is missing.",
    "This seems to depend on the graphics driver.",
    "The page is complex with many iframes.",
    "Printing doesn't work at all.",
    "The flash plugin is out of date.",
    "An insufficient memory warning is shown.",
    "The layout looks like a mess after zooming.",
];

const TD_TITLES: &[&str] = &[
    "{C}: simplify ownership model",
    "{C}: consolidate duplicated code paths",
    "Migrate {c} off the legacy path",
    "Track follow-up work for the {c}",
    "{C} layering violations",
    "Decouple the {c} from the {c2}",
    "{C}: unify the two configuration formats",
];

const DOMAINS_TD: &[(&str, u32)] = &[
    ("chromium.org", 45),
    ("google.com", 20),
    ("gmail.com", 30),
    ("etouch.net", 5),
];

const DOMAINS_OTHER: &[(&str, u32)] = &[
    ("chromium.org", 30),
    ("google.com", 15),
    ("gmail.com", 40),
    ("etouch.net", 5),
    ("example.net", 10),
];

const STATUS_TD: &[(&str, u32)] = &[
    ("Assigned", 30),
    ("Available", 25),
    ("Started", 10),
    ("Fixed", 15),
    ("Untriaged", 5),
    ("Archived", 10),
    ("WontFix", 5),
];

const STATUS_OTHER: &[(&str, u32)] = &[
    ("Fixed", 25),
    ("Duplicate", 15),
    ("WontFix", 15),
    ("Verified", 15),
    ("Untriaged", 10),
    ("Archived", 10),
    ("Assigned", 5),
    ("Available", 5),
];

const TYPES_TD: &[(&str, u32)] = &[
    ("Bug", 35),
    ("Feature", 25),
    ("Task", 25),
    ("Bug-Regression", 15),
];

const TYPES_OTHER: &[(&str, u32)] = &[
    ("Bug", 55),
    ("Bug-Regression", 20),
    ("Bug-Security", 10),
    ("Feature", 10),
    ("Compat", 5),
];

fn weighted<'a>(rng: &mut ChaCha8Rng, table: &[(&'a str, u32)]) -> &'a str {
    let total: u32 = table.iter().map(|(_, w)| w).sum();
    let mut pick = rng.random_range(0..total);
    for (item, w) in table {
        if pick < *w {
            return item;
        }
        pick -= w;
    }
    table[table.len() - 1].0
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty pool")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sha(rng: &mut ChaCha8Rng) -> String {
    (0..40)
        .map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap())
        .collect()
}

fn fill(rng: &mut ChaCha8Rng, template: &str) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("balanced template");
        let value = match &rest[open + 1..close] {
            "c" => pick(rng, COMPONENTS).to_string(),
            "C" => capitalize(pick(rng, COMPONENTS)),
            "c2" => pick(rng, COMPONENTS).to_string(),
            "f" => pick(rng, FEATURES).to_string(),
            "a" => pick(rng, ACTIONS).to_string(),
            "x" => pick(rng, FAILURES).to_string(),
            "v" => pick(rng, VERBS).to_string(),
            "os" => pick(rng, PLATFORMS).to_string(),
            "ver" => format!(
                "{}.0.{}.{}",
                rng.random_range(5..60),
                rng.random_range(300..3000),
                rng.random_range(0..200)
            ),
            "n" => rng.random_range(100_000..470_000).to_string(),
            "sha" => sha(rng),
            other => panic!("unknown template slot {other}"),
        };
        out.push_str(&value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Picks an early phrase sentence, favouring the head of the list.
fn fill_pick(rng: &mut ChaCha8Rng, pool: &[&str]) -> String {
    let template = pick(rng, pool);
    fill(rng, template)
}

fn early_phrase(rng: &mut ChaCha8Rng) -> &'static str {
    let n = TD_EXPLICIT_EARLY.len();
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    TD_EXPLICIT_EARLY[a.min(b)]
}

fn email(rng: &mut ChaCha8Rng, domain: &str) -> String {
    let user: String = (0..rng.random_range(3..8))
        .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
        .collect();
    if domain == "gmail.com" && rng.random_bool(0.5) {
        format!("{}...@{domain}", &user[..3])
    } else {
        format!("{user}@{domain}")
    }
}

fn make_ticket(rng: &mut ChaCha8Rng, id: String, is_td: bool) -> Ticket {
    let epoch = Utc.with_ymd_and_hms(2008, 8, 30, 0, 0, 0).unwrap();
    let opened_at = epoch + Duration::seconds(rng.random_range(0..270_000_000));

    let td_title = is_td && rng.random_bool(0.35);
    let title = if td_title {
        fill_pick(rng, TD_TITLES)
    } else {
        fill(rng, "The {f} {x} on {os}")
    };
    let mut description = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        description.push(fill_pick(rng, NEUTRAL));
    }
    // The ordinary thread looks the same for both classes.
    let mut thread: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(0..8) {
        let parts: Vec<String> = (0..rng.random_range(1..4))
            .map(|_| {
                let template = if rng.random_bool(0.7) {
                    pick(rng, NEUTRAL)
                } else {
                    pick(rng, PROCESS)
                };
                fill(rng, template)
            })
            .collect();
        thread.push(parts.join(" "));
    }

    let mut extra: Vec<String> = Vec::new();
    if is_td {
        let n = 1 + rng.random_bool(0.5) as usize + rng.random_bool(0.25) as usize;
        for _ in 0..n {
            extra.push(fill_pick(rng, TD_PARAPHRASE));
        }
        if rng.random_bool(0.5) {
            let p = early_phrase(rng);
            extra.push(fill(rng, p));
        }
        if rng.random_bool(0.35) {
            extra.push(fill_pick(rng, TD_EXPLICIT_LATE));
        }
    } else {
        if rng.random_bool(0.12) {
            extra.push(fill_pick(rng, INNOCENT_EARLY));
        }
        if rng.random_bool(0.3) {
            extra.push(fill_pick(rng, INNOCENT_LATE));
        }
        if rng.random_bool(0.06) {
            extra.push(fill_pick(rng, TD_PARAPHRASE));
        }
    }
    // Signal sentences join the description or an existing comment more
    // often than they start a comment of their own.
    for s in extra {
        let r = rng.random_range(0..10);
        if r < 3 {
            description.push(s);
        } else if r < 8 && !thread.is_empty() {
            let at = rng.random_range(0..thread.len());
            thread[at].push(' ');
            thread[at].push_str(&s);
        } else {
            let at = rng.random_range(0..=thread.len());
            thread.insert(at, s);
        }
    }

    let mut posted_at = opened_at;
    let comments = thread
        .into_iter()
        .map(|text| {
            posted_at += Duration::seconds(rng.random_range(600..400_000));
            let author = format!("dev{}@chromium.org", rng.random_range(1..400));
            Comment {
                author,
                posted_at,
                text,
            }
        })
        .collect();

    let domains = if is_td { DOMAINS_TD } else { DOMAINS_OTHER };
    let domain = weighted(rng, domains);
    let member_rate = if is_td { 0.6 } else { 0.4 };
    let priority = if rng.random_bool(0.1) {
        None
    } else {
        Some(rng.random_range(0..4))
    };
    Ticket {
        id,
        title,
        description: description.join(" "),
        comments,
        author_email: email(rng, domain),
        author_is_project_member: rng.random_bool(member_rate),
        priority,
        status: weighted(rng, if is_td { STATUS_TD } else { STATUS_OTHER }).to_string(),
        issue_type: weighted(rng, if is_td { TYPES_TD } else { TYPES_OTHER }).to_string(),
        opened_at,
    }
}

/// Generates `n_tickets` tickets, exactly `round(td_rate * n_tickets)` of
/// them technical debt.
pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<(Corpus, GroundTruth)> {
    if config.n_tickets == 0 {
        return Err(Error::invalid("n_tickets must be positive"));
    }
    if !(0.0..=1.0).contains(&config.td_rate) {
        return Err(Error::invalid("td_rate must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_td = (config.td_rate * config.n_tickets as f64).round() as usize;
    let mut is_td: Vec<bool> = (0..config.n_tickets).map(|i| i < n_td).collect();
    is_td.shuffle(&mut rng);

    let mut corpus = Corpus::new();
    let mut truth = GroundTruth::new();
    for (i, td) in is_td.into_iter().enumerate() {
        let id = format!("{}", 100_000 + i);
        truth.insert(id.clone(), td as u8);
        corpus.insert_ticket(make_ticket(&mut rng, id, td))?;
    }
    Ok((corpus, truth))
}

/// A rater's probabilistic label for a ticket with known ground truth.
pub fn simulated_label<R: Rng + ?Sized>(rng: &mut R, truth: u8) -> f64 {
    const TD: [f64; 6] = [1.0, 1.0, 0.9, 0.8, 0.7, 0.6];
    const OTHER: [f64; 6] = [0.0, 0.0, 0.0, 0.1, 0.2, 0.3];
    let pool = if truth == 1 { &TD } else { &OTHER };
    pool[rng.random_range(0..pool.len())]
}

/// Word groups sharing a direction in the synthetic pretrained embedding.
const SYNONYM_SETS: &[&[&str]] = &[
    &["deviate", "differ", "vary", "diverge", "change"],
    &["outdated", "old", "obsolete", "legacy", "stale"],
    &["redundant", "duplicated", "duplicate", "copied", "copies"],
    &["redesign", "rewrite", "migrate", "migration", "consolidate", "unify"],
    &["decouple", "decoupled", "coupling", "layering", "tangled", "abstraction"],
    &["complicated", "convoluted", "brittle", "complex", "undocumented"],
    &["regret", "unfortunate", "sorry", "postponed", "costly"],
    &["corrupt", "corrupted", "broken", "garbage", "blank"],
    &["horrible", "terrible", "awful", "bad", "mess"],
    &["delay", "slow", "late", "hangs", "freezes", "deadline"],
];

/// Indices of the synonym sets that describe design problems.
const DESIGN_SETS: &[usize] = &[0, 1, 2, 3, 4, 5, 6];

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Vocabulary words appearing anywhere in the generator's text pools.
fn pool_words() -> Vec<String> {
    let pools: [&[&str]; 16] = [
        COMPONENTS,
        FEATURES,
        ACTIONS,
        FAILURES,
        VERBS,
        PLATFORMS,
        NEUTRAL,
        PROCESS,
        TD_EXPLICIT_EARLY,
        TD_EXPLICIT_LATE,
        TD_PARAPHRASE,
        INNOCENT_EARLY,
        INNOCENT_LATE,
        TD_TITLES,
        &["the"],
        &["technical", "debt"],
    ];
    let mut words: Vec<String> = pools
        .iter()
        .flat_map(|p| p.iter())
        .flat_map(|s| {
            s.split(|c: char| !c.is_ascii_alphabetic())
                .filter(|w| !w.is_empty())
                .map(str::to_ascii_lowercase)
                .collect::<Vec<_>>()
        })
        .collect();
    words.sort();
    words.dedup();
    words
}

/// A stand-in for a large pretrained embedding: words in the same synonym set
/// point in similar directions, design-problem sets share a common
/// component, and every other generator word gets an independent direction.
/// Always contains the ten concept targets.
pub fn synthetic_pretrained_embedding(dim: usize, seed: u64) -> WordEmbedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let design_axis = unit_gaussian(&mut rng, dim);
    let centers: Vec<Vec<f64>> = SYNONYM_SETS
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let own = unit_gaussian(&mut rng, dim);
            let shared = if DESIGN_SETS.contains(&i) { 0.6 } else { 0.0 };
            own.iter()
                .zip(&design_axis)
                .map(|(o, d)| o + shared * d)
                .collect()
        })
        .collect();

    let mut vocab: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (set, center) in SYNONYM_SETS.iter().zip(&centers) {
        for word in set.iter() {
            let noise = unit_gaussian(&mut rng, dim);
            let scale = if CONCEPT_TARGETS.contains(word) { 0.3 } else { 0.6 };
            let v = center.iter().zip(&noise).map(|(c, n)| c + scale * n).collect();
            vocab.insert(word.to_string(), v);
        }
    }
    for word in pool_words() {
        if !vocab.contains_key(&word) {
            let v = unit_gaussian(&mut rng, dim);
            vocab.insert(word, v);
        }
    }
    let (words, rows): (Vec<String>, Vec<Vec<f64>>) = vocab.into_iter().unzip();
    WordEmbedding::from_rows(words, rows).expect("generated rows are consistent")
}
