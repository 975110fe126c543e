//! Orchestration: configuration, baselines, the active-learning sampler and
//! the end-to-end run.

mod active;
mod baselines;
mod config;
mod run;
pub mod stages;

pub use active::{
    label_progress_curve, sample_next_batch, simulate_active_learning, simulate_uniform_labels, SIMULATED_RATER,
};
pub use baselines::{
    baseline_keyphrase, baseline_no_td, keyphrase_prefix_score, keyphrase_ratio, precision_recall_ratio,
    tune_keyphrase_k,
};
pub use config::{ActiveLearning, EvalOptions, FeatureOptions, Paths, PipelineConfig, SeedStream, SyntheticOptions};
pub use run::{
    estimate_corpus_prevalence, evaluate_scores, importance_csv, load_model_for, metrics_csv, run_end_to_end, train_main, ModelEval, RunOutcome, RunReport,
};
