use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::synthetic::SyntheticConfig;
use crate::embeddings::{CbowConfig, DocConfig};
use crate::error::{Error, Result};
use crate::gbm::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Ticket JSONL. When absent, a synthetic corpus is generated.
    pub corpus: Option<PathBuf>,
    /// Label journal JSONL. When absent with a synthetic corpus, labels are
    /// produced by the simulated active-learning loop.
    pub labels: Option<PathBuf>,
    /// Pretrained 100-d text embedding. When absent, a synthetic one is used.
    pub pretrained: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub ngrams: bool,
    pub pretrained_dim: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            ngrams: false,
            pretrained_dim: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveLearning {
    /// Lower bound on a ticket's sampling weight.
    pub floor: f64,
    pub batch_size: usize,
    /// Uniformly sampled first batch, before any model exists.
    pub initial_batch: usize,
    /// Total labels the simulated loop collects.
    pub target_labels: usize,
}

impl Default for ActiveLearning {
    fn default() -> Self {
        ActiveLearning {
            floor: 0.05,
            batch_size: 60,
            initial_batch: 60,
            target_labels: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub holdout_fraction: f64,
    pub bootstrap_replicates: usize,
    pub cv_folds: usize,
    /// Replicates for the prevalence interval that refits the inclusion
    /// regression each time; 0 keeps the fitted probabilities fixed.
    pub prevalence_refit_replicates: usize,
    /// Fixed keyphrase-baseline prefix length; tuned when absent.
    pub keyphrase_k: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            holdout_fraction: 588.0 / 1934.0,
            bootstrap_replicates: 500,
            cv_folds: 10,
            prevalence_refit_replicates: 0,
            keyphrase_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOptions {
    pub n_tickets: usize,
    pub td_rate: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            n_tickets: 5000,
            td_rate: 0.16,
        }
    }
}

/// Everything a pipeline run reads. Loaded from TOML; every key optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; per-stage seeds are derived from it.
    pub seed: u64,
    pub paths: Paths,
    pub features: FeatureOptions,
    pub train: TrainConfig,
    pub cbow: CbowConfig,
    pub docvec: DocConfig,
    pub active_learning: ActiveLearning,
    pub evaluation: EvalOptions,
    pub synthetic: SyntheticOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            paths: Paths::default(),
            features: FeatureOptions::default(),
            train: TrainConfig::default(),
            cbow: CbowConfig::default(),
            docvec: DocConfig::default(),
            active_learning: ActiveLearning::default(),
            evaluation: EvalOptions::default(),
            synthetic: SyntheticOptions::default(),
        }
    }
}

/// Stage names used to derive independent seeds from the master seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    Synthetic = 1,
    Cbow,
    Docvec,
    Gbm,
    Labels,
    Sampler,
    Bootstrap,
    Folds,
    Prevalence,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    fn resolve_relative_to(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.corpus, &mut p.labels, &mut p.pretrained, &mut p.out_dir] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let al = &self.active_learning;
        if !(al.floor > 0.0 && al.floor <= 1.0) {
            return Err(Error::invalid("active_learning.floor must lie in (0, 1]"));
        }
        if al.batch_size == 0 || al.initial_batch == 0 {
            return Err(Error::invalid("active-learning batch sizes must be positive"));
        }
        let h = self.evaluation.holdout_fraction;
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid("evaluation.holdout_fraction must lie in (0, 1)"));
        }
        if let Some(k) = self.evaluation.keyphrase_k {
            if !(1..=25).contains(&k) {
                return Err(Error::invalid("evaluation.keyphrase_k must lie in 1..=25"));
            }
        }
        Ok(())
    }

    pub fn seed_for(&self, stream: SeedStream) -> u64 {
        // splitmix64 of (seed, stream): well-spread and stable
        let mut z = self
            .seed
            .wrapping_add((stream as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n_tickets: self.synthetic.n_tickets,
            td_rate: self.synthetic.td_rate,
            seed: self.seed_for(SeedStream::Synthetic),
        }
    }

    pub fn cbow_config(&self) -> CbowConfig {
        CbowConfig {
            seed: self.seed_for(SeedStream::Cbow),
            ..self.cbow.clone()
        }
    }

    pub fn doc_config(&self) -> DocConfig {
        DocConfig {
            seed: self.seed_for(SeedStream::Docvec),
            ..self.docvec.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed_for(SeedStream::Gbm),
            ..self.train.clone()
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
