use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{Corpus, LabelRecord};
use crate::error::{Error, Result};

/// Append-only JSONL file of label records.
#[derive(Debug)]
pub struct LabelJournal {
    path: PathBuf,
    file: File,
}

impl LabelJournal {
    /// Opens (creating if needed) a journal for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(LabelJournal { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record and syncs it to disk before returning.
    pub fn append(&mut self, record: &LabelRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }

    /// Validates the record against the corpus, journals it, then applies it.
    pub fn upsert(&mut self, corpus: &mut Corpus, record: LabelRecord) -> Result<LabelRecord> {
        if !corpus.contains(&record.ticket_id) {
            return Err(Error::UnknownTicket(record.ticket_id));
        }
        if !(0.0..=1.0).contains(&record.label) {
            return Err(Error::LabelOutOfRange(record.label));
        }
        self.append(&record)?;
        corpus.upsert_label(record).cloned()
    }

    /// Reads every record in file order. A torn final line (from a crash
    /// mid-append) is ignored; malformed lines elsewhere are errors.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
        let path = path.as_ref();
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(path, e)),
        };
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        let last = lines.iter().rposition(|l| !l.trim().is_empty());
        let mut records = Vec::new();
        for (idx, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LabelRecord>(line) {
                Ok(r) => records.push(r),
                Err(e) if Some(idx) == last => {
                    log::warn!("{}:{}: ignoring torn journal tail: {e}", path.display(), idx + 1);
                }
                Err(e) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(records)
    }

    /// Replays a journal file into the corpus.
    pub fn replay(path: impl AsRef<Path>, corpus: &mut Corpus) -> Result<usize> {
        let records = Self::read(path)?;
        let n = records.len();
        corpus.replay_labels(records)?;
        Ok(n)
    }
}
