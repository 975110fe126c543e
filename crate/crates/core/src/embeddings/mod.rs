//! Word and document embeddings.
//!
//! [`WordEmbedding`] holds either a pretrained text-format embedding or one
//! trained here with CBOW ([`train_cbow`]). [`DocEmbedding`] holds PV-DBOW
//! document vectors ([`train_docvecs`]) and can infer vectors for tickets it
//! has not seen ([`infer_docvec`]).

mod cbow;
mod docvec;
mod vocab;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cbow::{train_cbow, CbowConfig, TrainedWords};
pub use docvec::{infer_docvec, train_docvecs, DocConfig, DocEmbedding, DocVecSource};
pub use vocab::Vocab;

/// Version written into serialized embedding files.
pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WordEmbeddingRepr", into = "WordEmbeddingRepr")]
pub struct WordEmbedding {
    dim: usize,
    vocab: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct WordEmbeddingRepr {
    dim: usize,
    vocab: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<WordEmbeddingRepr> for WordEmbedding {
    type Error = Error;

    fn try_from(r: WordEmbeddingRepr) -> Result<Self> {
        let emb = WordEmbedding::from_rows(r.vocab, r.vectors)?;
        if emb.dim != r.dim && !emb.is_empty() {
            return Err(Error::invalid(format!(
                "declared dim {} but rows have {}",
                r.dim, emb.dim
            )));
        }
        Ok(emb)
    }
}

impl From<WordEmbedding> for WordEmbeddingRepr {
    fn from(e: WordEmbedding) -> Self {
        let vectors = e.vectors.chunks(e.dim.max(1)).map(<[f64]>::to_vec).collect();
        WordEmbeddingRepr {
            dim: e.dim,
            vocab: e.vocab,
            vectors,
        }
    }
}

impl WordEmbedding {
    pub fn from_rows(vocab: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if vocab.len() != rows.len() {
            return Err(Error::invalid("vocab and row counts differ"));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut index = HashMap::with_capacity(vocab.len());
        let mut vectors = Vec::with_capacity(dim * rows.len());
        for (i, (word, row)) in vocab.iter().zip(&rows).enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!("row for {word:?} has wrong length")));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("row for {word:?} is not finite")));
            }
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {word:?}")));
            }
            vectors.extend_from_slice(row);
        }
        Ok(WordEmbedding {
            dim,
            vocab,
            vectors,
            index,
        })
    }

    pub(crate) fn from_flat(vocab: Vec<String>, dim: usize, vectors: Vec<f64>) -> Self {
        debug_assert_eq!(vocab.len() * dim, vectors.len());
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordEmbedding {
            dim,
            vocab,
            vectors,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    /// Writes the plain-text `word v1 ... vd` format.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, word) in self.vocab.iter().enumerate() {
            write!(out, "{word}")?;
            for x in self.row(i) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses a pretrained embedding in `word v1 ... vd` text format.
///
/// With `restrict`, only the listed words are kept. A line with the wrong
/// number of columns is fatal; so is an empty result.
pub fn read_pretrained<R: BufRead>(
    reader: R,
    origin: &Path,
    expected_dim: usize,
    restrict: Option<&HashSet<String>>,
) -> Result<WordEmbedding> {
    let mut vocab = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message,
        };
        let mut cols = line.split_whitespace();
        let Some(word) = cols.next() else { continue };
        let values: Vec<&str> = cols.collect();
        if values.len() != expected_dim {
            return Err(parse_err(format!(
                "expected {expected_dim} values after the word, found {}",
                values.len()
            )));
        }
        if restrict.is_some_and(|r| !r.contains(word)) || !seen.insert(word.to_string()) {
            continue;
        }
        let row = values
            .iter()
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(parse_err(format!("bad number {v:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        vocab.push(word.to_string());
        rows.push(row);
    }
    if vocab.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no embedding rows left after restriction",
            origin.display()
        )));
    }
    WordEmbedding::from_rows(vocab, rows)
}

pub fn load_pretrained(
    path: impl AsRef<Path>,
    expected_dim: usize,
    restrict: Option<&HashSet<String>>,
) -> Result<WordEmbedding> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pretrained(BufReader::new(file), path, expected_dim, restrict)
}
