//! Tickets, probabilistic expert labels, and their JSONL persistence.

mod journal;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use journal::LabelJournal;

/// RFC 3339 timestamps at one-second precision.
pub mod timestamp {
    use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub author: String,
    #[serde(with = "timestamp")]
    pub posted_at: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ticket {
    pub id: String,
    pub title: String,
    pub description: String,
    pub comments: Vec<Comment>,
    pub author_email: String,
    pub author_is_project_member: bool,
    pub priority: Option<u32>,
    pub status: String,
    pub issue_type: String,
    #[serde(with = "timestamp")]
    pub opened_at: DateTime<Utc>,
}

impl Ticket {
    /// Title, description and every comment, joined by single newlines.
    pub fn free_text(&self) -> String {
        free_text(self)
    }
}

pub fn free_text(ticket: &Ticket) -> String {
    let mut parts = Vec::with_capacity(2 + ticket.comments.len());
    parts.push(ticket.title.as_str());
    parts.push(ticket.description.as_str());
    parts.extend(ticket.comments.iter().map(|c| c.text.as_str()));
    parts.join("\n")
}

/// Answers recorded while walking the labeling rubric; `None` means the step
/// was skipped or answered "unsure".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricPath {
    pub artifact_evidence: Option<bool>,
    pub improvement_or_defect: Option<bool>,
    pub design_limitation: Option<bool>,
    pub side_effects_or_extra_work: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub ticket_id: String,
    pub label: f64,
    pub rater: String,
    #[serde(with = "timestamp")]
    pub labeled_at: DateTime<Utc>,
    #[serde(default)]
    pub rubric_path: RubricPath,
    #[serde(default)]
    pub notes: Option<String>,
}

/// Tickets keyed by id plus the label journal.
///
/// The journal keeps every accepted label in arrival order; the active set
/// holds the latest record per `(ticket_id, rater)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    tickets: BTreeMap<String, Ticket>,
    journal: Vec<LabelRecord>,
    active: BTreeMap<(String, String), usize>,
}

fn check_ticket(t: &Ticket) -> std::result::Result<(), String> {
    if t.id.is_empty() {
        return Err("empty ticket id".into());
    }
    Ok(())
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tickets(tickets: impl IntoIterator<Item = Ticket>) -> Result<Self> {
        let mut corpus = Corpus::new();
        for t in tickets {
            corpus.insert_ticket(t)?;
        }
        Ok(corpus)
    }

    pub fn insert_ticket(&mut self, ticket: Ticket) -> Result<()> {
        check_ticket(&ticket).map_err(Error::InvalidInput)?;
        if self.tickets.contains_key(&ticket.id) {
            return Err(Error::DuplicateTicket(ticket.id));
        }
        self.tickets.insert(ticket.id.clone(), ticket);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Ticket> {
        self.tickets.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.tickets.contains_key(id)
    }

    /// Tickets in ascending id order.
    pub fn tickets(&self) -> impl ExactSizeIterator<Item = &Ticket> {
        self.tickets.values()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.tickets.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tickets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickets.is_empty()
    }

    /// Validates and records a label, replacing any earlier record from the
    /// same rater for the same ticket.
    pub fn upsert_label(&mut self, record: LabelRecord) -> Result<&LabelRecord> {
        if !self.tickets.contains_key(&record.ticket_id) {
            return Err(Error::UnknownTicket(record.ticket_id));
        }
        if !(0.0..=1.0).contains(&record.label) {
            return Err(Error::LabelOutOfRange(record.label));
        }
        let key = (record.ticket_id.clone(), record.rater.clone());
        let pos = self.journal.len();
        self.journal.push(record);
        self.active.insert(key, pos);
        Ok(&self.journal[pos])
    }

    /// Every accepted label in arrival order.
    pub fn journal(&self) -> &[LabelRecord] {
        &self.journal
    }

    /// The active record per `(ticket_id, rater)`, ordered by that key.
    pub fn active_labels(&self) -> Vec<&LabelRecord> {
        self.active.values().map(|&i| &self.journal[i]).collect()
    }

    fn aggregated_positions(&self) -> BTreeMap<&str, usize> {
        let mut best: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in self.active.values() {
            let rec = &self.journal[i];
            best.entry(rec.ticket_id.as_str())
                .and_modify(|cur| {
                    if (rec.labeled_at, i) > (self.journal[*cur].labeled_at, *cur) {
                        *cur = i;
                    }
                })
                .or_insert(i);
        }
        best
    }

    /// One label per ticket: the active record with the latest `labeled_at`,
    /// later journal entries winning ties. Keyed by ticket id.
    pub fn aggregated_labels(&self) -> BTreeMap<&str, &LabelRecord> {
        self.aggregated_positions()
            .into_iter()
            .map(|(k, i)| (k, &self.journal[i]))
            .collect()
    }

    /// Aggregated labels ordered by labeling time (journal order breaks ties).
    pub fn labels_in_time_order(&self) -> Vec<&LabelRecord> {
        let mut positions: Vec<usize> = self.aggregated_positions().into_values().collect();
        positions.sort_by_key(|&i| (self.journal[i].labeled_at, i));
        positions.into_iter().map(|i| &self.journal[i]).collect()
    }

    /// Rebuilds the active set from a journal, in order.
    pub fn replay_labels(&mut self, records: impl IntoIterator<Item = LabelRecord>) -> Result<()> {
        for r in records {
            self.upsert_label(r)?;
        }
        Ok(())
    }

    /// Serializes tickets as JSONL in id order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in self.tickets.values() {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// A line that could not be parsed during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedLine>,
}

/// Reads tickets from a JSONL stream. Malformed lines are skipped and
/// reported; a duplicate id aborts ingestion.
pub fn read_jsonl<R: BufRead>(reader: R, origin: &Path) -> Result<Ingested> {
    let mut corpus = Corpus::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Ticket>(&line)
            .map_err(|e| e.to_string())
            .and_then(|t| check_ticket(&t).map(|_| t));
        match parsed {
            Ok(ticket) => corpus.insert_ticket(ticket)?,
            Err(reason) => {
                log::warn!("{}:{line_no}: skipping malformed ticket: {reason}", origin.display());
                skipped.push(SkippedLine {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(Ingested { corpus, skipped })
}

pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), path)
}
