use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::Serialize;

use debtscan::corpus::{Corpus, LabelJournal, LabelRecord, RubricPath};
use debtscan::evaluation::Curve;
use debtscan::features::{keyphrase_spans, FeatureMatrix, PhraseSpan};
use debtscan::gbm::{GbmModel, TrainConfig};
use debtscan::pipeline::{label_progress_curve, sample_next_batch, stages, train_main, PipelineConfig};
use debtscan::Error;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub train: TrainConfig,
    /// Lower bound on a ticket's sampling weight.
    pub floor: f64,
    pub seed: u64,
    /// Append-only label journal; replayed at startup.
    pub journal: PathBuf,
}

/// An error with its HTTP status and a short machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ServiceError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ServiceError {
            status: 400,
            code: "bad_request",
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ServiceError {
            status: 404,
            code: "not_found",
            message: message.into(),
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        ServiceError {
            status: 409,
            code: "conflict",
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ServiceError {
            status: 500,
            code: "internal",
            message: message.into(),
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownTicket(_) => ServiceError::not_found(e.to_string()),
            Error::LabelOutOfRange(_) | Error::InvalidInput(_) => ServiceError::bad_request(e.to_string()),
            other => ServiceError::internal(other.to_string()),
        }
    }
}

struct Labels {
    corpus: Corpus,
    journal: LabelJournal,
}

#[derive(Clone)]
struct Served {
    model: Option<Arc<GbmModel>>,
    version: u64,
    trained_on: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RetrainStatus {
    pub running: bool,
    pub last_error: Option<String>,
    pub last_finished_at: Option<DateTime<Utc>>,
}

struct Shared {
    config: ServiceConfig,
    matrix: FeatureMatrix,
    labels: RwLock<Labels>,
    served: RwLock<Served>,
    busy: AtomicBool,
    status: Mutex<RetrainStatus>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

#[derive(Debug, Clone, Serialize)]
pub struct QueueEntry {
    pub ticket_id: String,
    /// Current model probability; absent under the uniform fallback.
    pub probability: Option<f64>,
    pub sampled_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Queue {
    pub model_version: u64,
    /// True when no model exists yet and tickets were drawn uniformly.
    pub uniform_fallback: bool,
    pub entries: Vec<QueueEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TicketView {
    pub ticket: debtscan::corpus::Ticket,
    pub free_text: String,
    /// Byte offsets into `free_text`.
    pub spans: Vec<PhraseSpan>,
    pub labels: Vec<LabelRecord>,
    pub probability: Option<f64>,
    pub model_version: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub n_labels: usize,
    pub n_tickets: usize,
    pub histogram: Vec<Bin>,
    pub progress: Curve,
    pub model_version: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub model_version: u64,
    pub trained: bool,
    pub trained_on_labels: usize,
    pub registry_version: String,
    pub n_trees: usize,
    pub base_score: Option<f64>,
    pub retrain: RetrainStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrainAccepted {
    pub status: &'static str,
    pub current_model_version: u64,
    pub n_labels: usize,
}

/// Ten bins `[0, 0.1), ..., [0.8, 0.9), [0.9, 1.0]`.
pub fn label_histogram(labels: &[f64]) -> Vec<Bin> {
    let mut counts = [0usize; 10];
    for &y in labels {
        // compare against the decimal edges so 0.3 lands in [0.3, 0.4)
        let bin = (1..10).rev().find(|&b| y >= b as f64 / 10.0).unwrap_or(0);
        counts[bin] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(b, &count)| Bin {
            lo: b as f64 / 10.0,
            hi: (b + 1) as f64 / 10.0,
            count,
        })
        .collect()
}

fn poisoned<T>(_: T) -> ServiceError {
    ServiceError::internal("state lock poisoned")
}

impl AppState {
    /// Replays the journal into `corpus` and serves tickets from `matrix`,
    /// which must cover every corpus ticket.
    pub fn open(mut corpus: Corpus, matrix: FeatureMatrix, config: ServiceConfig) -> debtscan::Result<Self> {
        if !(config.floor > 0.0 && config.floor <= 1.0) {
            return Err(Error::InvalidInput(format!("floor {} outside (0, 1]", config.floor)));
        }
        config.train.validate()?;
        if let Some(id) = corpus.ids().find(|id| matrix.row(id).is_none()) {
            return Err(Error::InvalidInput(format!("ticket {id} has no feature row")));
        }
        let n = LabelJournal::replay(&config.journal, &mut corpus)?;
        log::info!("replayed {n} labels from {}", config.journal.display());
        let journal = LabelJournal::open(&config.journal)?;
        Ok(AppState(Arc::new(Shared {
            config,
            matrix,
            labels: RwLock::new(Labels { corpus, journal }),
            served: RwLock::new(Served {
                model: None,
                version: 0,
                trained_on: 0,
            }),
            busy: AtomicBool::new(false),
            status: Mutex::new(RetrainStatus::default()),
        })))
    }

    /// Builds the corpus and feature matrix the way a pipeline run does,
    /// reusing embeddings already saved in the output directory.
    pub fn from_pipeline(config: &PipelineConfig, journal: PathBuf) -> debtscan::Result<Self> {
        if config.features.ngrams {
            log::warn!("n-gram features depend on the label split; the service uses the base registry");
        }
        let inputs = stages::load_corpus(config).map_err(|e| e.in_stage("corpus"))?;
        let pretrained =
            stages::load_pretrained_for(config, &inputs.corpus).map_err(|e| e.in_stage("pretrained"))?;
        let out = config.out_dir();
        let embeddings = match stages::Embeddings::load(&out) {
            Ok(e) => e,
            Err(_) => {
                let tokens = stages::tokenize_corpus(&inputs.corpus);
                let e = stages::Embeddings::train(&tokens, config).map_err(|e| e.in_stage("embeddings"))?;
                std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
                e.save(&out)?;
                e
            }
        };
        let ctx = stages::build_context(pretrained, &embeddings, None).map_err(|e| e.in_stage("features"))?;
        let matrix = FeatureMatrix::build(inputs.corpus.tickets(), &ctx);
        // labels configured in the pipeline are served too
        let mut corpus = Corpus::from_tickets(inputs.corpus.tickets().cloned())?;
        if config.paths.labels.as_deref() != Some(journal.as_path()) {
            corpus.replay_labels(inputs.corpus.journal().iter().cloned())?;
        }
        AppState::open(
            corpus,
            matrix,
            ServiceConfig {
                train: config.train_config(),
                floor: config.active_learning.floor,
                seed: config.seed,
                journal,
            },
        )
    }

    fn served(&self) -> Result<Served, ServiceError> {
        Ok(self.0.served.read().map_err(poisoned)?.clone())
    }

    pub fn model_version(&self) -> u64 {
        self.served().map(|s| s.version).unwrap_or(0)
    }

    pub fn queue(&self, limit: i64) -> Result<Queue, ServiceError> {
        if limit <= 0 {
            return Err(ServiceError::bad_request("limit must be positive"));
        }
        let served = self.served()?;
        let pool: Vec<String> = {
            let labels = self.0.labels.read().map_err(poisoned)?;
            let labeled = labels.corpus.aggregated_labels();
            labels
                .corpus
                .ids()
                .filter(|id| !labeled.contains_key(id))
                .map(String::from)
                .collect()
        };
        let now = Utc::now();
        if pool.is_empty() {
            return Ok(Queue {
                model_version: served.version,
                uniform_fallback: served.model.is_none(),
                entries: Vec::new(),
            });
        }
        let probs: BTreeMap<&str, f64> = match &served.model {
            Some(m) => pool
                .iter()
                .map(|id| (id.as_str(), m.predict_proba(self.0.matrix.row(id).expect("checked at open"))))
                .collect(),
            None => pool.iter().map(|id| (id.as_str(), 1.0)).collect(),
        };
        let candidates: Vec<(&str, f64)> = probs.iter().map(|(k, v)| (*k, *v)).collect();
        let n = (limit as usize).min(candidates.len());
        let seed = self.0.config.seed ^ served.version.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let batch = sample_next_batch(&candidates, n, self.0.config.floor, seed)?;
        Ok(Queue {
            model_version: served.version,
            uniform_fallback: served.model.is_none(),
            entries: batch
                .into_iter()
                .map(|id| QueueEntry {
                    probability: served.model.as_ref().map(|_| probs[id.as_str()]),
                    ticket_id: id,
                    sampled_at: now,
                })
                .collect(),
        })
    }

    pub fn ticket(&self, id: &str) -> Result<TicketView, ServiceError> {
        let served = self.served()?;
        let labels = self.0.labels.read().map_err(poisoned)?;
        let ticket = labels
            .corpus
            .get(id)
            .ok_or_else(|| ServiceError::not_found(format!("unknown ticket {id:?}")))?
            .clone();
        let free_text = ticket.free_text();
        let spans = keyphrase_spans(&free_text);
        let records = labels
            .corpus
            .active_labels()
            .into_iter()
            .filter(|r| r.ticket_id == id)
            .cloned()
            .collect();
        let probability = served
            .model
            .as_ref()
            .and_then(|m| self.0.matrix.row(id).map(|r| m.predict_proba(r)));
        Ok(TicketView {
            ticket,
            free_text,
            spans,
            labels: records,
            probability,
            model_version: served.version,
        })
    }

    /// Journals the label (durably) before acknowledging it.
    pub fn post_label(
        &self,
        ticket_id: String,
        label: f64,
        rater: String,
        rubric_path: RubricPath,
        notes: Option<String>,
    ) -> Result<LabelRecord, ServiceError> {
        if rater.trim().is_empty() {
            return Err(ServiceError::bad_request("rater must not be empty"));
        }
        let record = LabelRecord {
            ticket_id,
            label,
            rater,
            labeled_at: Utc::now(),
            rubric_path,
            notes,
        };
        let mut guard = self.0.labels.write().map_err(poisoned)?;
        let Labels { corpus, journal } = &mut *guard;
        Ok(journal.upsert(corpus, record)?)
    }

    pub fn stats(&self) -> Result<Stats, ServiceError> {
        let version = self.served()?.version;
        let labels = self.0.labels.read().map_err(poisoned)?;
        let ordered: Vec<f64> = labels.corpus.labels_in_time_order().iter().map(|r| r.label).collect();
        Ok(Stats {
            n_labels: ordered.len(),
            n_tickets: labels.corpus.len(),
            histogram: label_histogram(&ordered),
            progress: label_progress_curve(&ordered),
            model_version: version,
        })
    }

    pub fn model_info(&self) -> Result<ModelInfo, ServiceError> {
        let served = self.served()?;
        let status = self.0.status.lock().map_err(poisoned)?.clone();
        Ok(ModelInfo {
            model_version: served.version,
            trained: served.model.is_some(),
            trained_on_labels: served.trained_on,
            registry_version: self.0.matrix.registry.version.clone(),
            n_trees: served.model.as_ref().map_or(0, |m| m.trees.len()),
            base_score: served.model.as_ref().map(|m| m.base_score),
            retrain: status,
        })
    }

    /// Claims the retrain slot and snapshots the labels; the caller runs
    /// [`RetrainJob::run`] off the request path.
    pub fn begin_retrain(&self) -> Result<(RetrainJob, RetrainAccepted), ServiceError> {
        let labels: BTreeMap<String, f64> = {
            let guard = self.0.labels.read().map_err(poisoned)?;
            stages::label_map(&guard.corpus)
        };
        let needed = 2 * self.0.config.train.min_data_in_leaf;
        if labels.len() < needed {
            return Err(ServiceError::conflict(format!(
                "retraining needs at least {needed} labeled tickets, have {}",
                labels.len()
            )));
        }
        if self.0.busy.swap(true, Ordering::SeqCst) {
            return Err(ServiceError::conflict("a retrain is already running"));
        }
        if let Ok(mut s) = self.0.status.lock() {
            s.running = true;
        }
        let accepted = RetrainAccepted {
            status: "started",
            current_model_version: self.model_version(),
            n_labels: labels.len(),
        };
        Ok((
            RetrainJob {
                state: self.clone(),
                labels,
            },
            accepted,
        ))
    }

    pub fn retrain_status(&self) -> RetrainStatus {
        self.0.status.lock().map(|s| s.clone()).unwrap_or_default()
    }
}

/// A claimed retrain; running it trains on the snapshot and swaps the model.
pub struct RetrainJob {
    state: AppState,
    labels: BTreeMap<String, f64>,
}

impl RetrainJob {
    pub fn run(self) {
        let shared = &self.state.0;
        let ids: Vec<String> = self.labels.keys().cloned().collect();
        let result = train_main(&shared.matrix, &self.labels, &ids, &shared.config.train);
        let error = match result {
            Ok(model) => match shared.served.write() {
                Ok(mut served) => {
                    served.version += 1;
                    served.model = Some(Arc::new(model));
                    served.trained_on = ids.len();
                    log::info!("serving model version {}", served.version);
                    None
                }
                Err(_) => Some("state lock poisoned".to_string()),
            },
            Err(e) => Some(e.to_string()),
        };
        if let Ok(mut s) = shared.status.lock() {
            s.running = false;
            s.last_error = error;
            s.last_finished_at = Some(Utc::now());
        }
        shared.busy.store(false, Ordering::SeqCst);
    }
}
