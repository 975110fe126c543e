//! Detects issue-tracker tickets that discuss technical debt.
//!
//! The pipeline: ingest tickets ([`corpus`]), normalize text ([`textprep`]),
//! train embeddings ([`embeddings`]), build the 105-feature vectors
//! ([`features`]), fit a gradient-boosted tree model on probabilistic labels
//! ([`gbm`]) and evaluate it with weights that undo the label sampling bias
//! ([`evaluation`]). [`pipeline`] wires the stages together.

pub mod corpus;
pub mod embeddings;
pub mod evaluation;
pub mod error;
pub mod features;
pub mod gbm;
pub mod pipeline;
pub mod textprep;

pub use error::{Error, Result};
