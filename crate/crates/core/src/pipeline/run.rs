use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::active::{label_progress_curve, simulate_active_learning};
use super::baselines::{keyphrase_prefix_score, precision_recall_ratio, tune_keyphrase_k};
use super::config::{PipelineConfig, SeedStream};
use super::stages::{
    build_context, fit_ngrams, label_map, load_corpus, load_pretrained_for, split_holdout, tokenize_corpus, write_json,
    write_text, Embeddings, HoldoutSplit,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, cumulative_recall_curves, estimate_prevalence, estimate_prevalence_refit, estimate_sampling_weights,
    improvement_ci, write_curves_csv, CvReport, EvalWeights, ImprovementCi, MetricReport, PrevalenceEstimate,
    DEFAULT_THRESHOLD, MIN_SAMPLING_PROB,
};
use crate::features::{keyphrase_flags, FeatureFamily, FeatureMatrix};
use crate::gbm::{train, GbmModel, Schema, TrainConfig};

/// Weighted and unweighted holdout metrics of one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub weighted: MetricReport,
    pub unweighted: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub registry_version: String,
    pub n_features: usize,
    pub n_tickets: usize,
    pub n_labeled: usize,
    pub n_train: usize,
    pub n_holdout: usize,
    /// Holdout tickets whose label exceeds 0.5.
    pub n_holdout_positive: usize,
    pub keyphrase_k: usize,
    /// Precision/recall ratio of the main model's out-of-fold predictions on
    /// the training split; `keyphrase_k` was tuned towards it.
    pub target_ratio: Option<f64>,
    pub main: ModelEval,
    pub keyphrase: ModelEval,
    pub no_td: ModelEval,
    pub improvement_over_keyphrase: ImprovementCi,
    pub improvement_over_no_td: ImprovementCi,
    pub cross_validation: CvReport,
    pub prevalence: PrevalenceEstimate,
    pub n_trees: usize,
    pub max_leaves_per_tree: usize,
    pub min_leaf_count: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: GbmModel,
    pub split: HoldoutSplit,
    pub out_dir: PathBuf,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn rows_of<'a>(m: &'a FeatureMatrix, ids: &[String]) -> Result<Vec<&'a [f64]>> {
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    m.select(&refs)
}

fn labels_of(labels: &BTreeMap<String, f64>, ids: &[String]) -> Vec<f64> {
    ids.iter().map(|id| labels[id]).collect()
}

/// Trains the main model on the given tickets.
pub fn train_main(m: &FeatureMatrix, labels: &BTreeMap<String, f64>, ids: &[String], config: &TrainConfig) -> Result<GbmModel> {
    let rows = rows_of(m, ids)?;
    train(&rows, &labels_of(labels, ids), &Schema::of(m), config)
}

/// Runs every stage on the configured inputs and writes all artifacts to
/// the output directory.
pub fn run_end_to_end(config: &PipelineConfig) -> Result<RunOutcome> {
    stage("config", config.validate())?;
    let out_dir = config.out_dir();
    stage(
        "output",
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e)),
    )?;
    let mut out = Artifacts {
        dir: out_dir.clone(),
        files: Vec::new(),
    };

    let mut inputs = stage("corpus", load_corpus(config))?;
    let pretrained = stage("pretrained", load_pretrained_for(config, &inputs.corpus))?;
    let tokens = tokenize_corpus(&inputs.corpus);
    let embeddings = stage("embeddings", Embeddings::train(&tokens, config))?;
    stage("embeddings", embeddings.save(&out_dir))?;
    out.path(super::stages::WORDS_FILE);
    out.path(super::stages::DOCS_FILE);
    let base_ctx = stage("features", build_context(pretrained.clone(), &embeddings, None))?;
    let base_matrix = FeatureMatrix::build(inputs.corpus.tickets(), &base_ctx);

    if inputs.corpus.journal().is_empty() {
        let truth = inputs.truth.as_ref().ok_or_else(|| {
            Error::invalid("no labels: configure paths.labels or use the synthetic corpus").in_stage("active_learning")
        })?;
        let records = stage(
            "active_learning",
            simulate_active_learning(
                &base_matrix,
                truth,
                &config.active_learning,
                &config.train_config(),
                config.seed_for(SeedStream::Sampler),
            ),
        )?;
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        out.emit("labels.jsonl", text)?;
        stage("active_learning", inputs.corpus.replay_labels(records))?;
    }

    let corpus = &inputs.corpus;
    let labels = label_map(corpus);
    let in_time = corpus.labels_in_time_order();
    let split = stage("split", split_holdout(&in_time, config.evaluation.holdout_fraction))?;

    let matrix = if config.features.ngrams {
        let train_ids: BTreeSet<String> = split.train.iter().cloned().collect();
        let vocab = fit_ngrams(&tokens, &train_ids);
        let ctx = stage("features", build_context(pretrained, &embeddings, Some(vocab)))?;
        FeatureMatrix::build(corpus.tickets(), &ctx)
    } else {
        base_matrix
    };
    stage("features", matrix.save_csv(out.path("features.csv")))?;

    let train_cfg = config.train_config();
    let model = stage("train", train_main(&matrix, &labels, &split.train, &train_cfg))?;
    out.emit("model.json", model.to_json()?)?;
    out.emit("trees.txt", model.dump_trees())?;

    // Out-of-fold predictions on the training split: CV report and the
    // precision/recall ratio the keyphrase baseline is tuned towards.
    let train_y = labels_of(&labels, &split.train);
    let train_rows = stage("cross_validation", rows_of(&matrix, &split.train))?;
    let schema = Schema::of(&matrix);
    let mut oof = vec![0.0; split.train.len()];
    let cv = stage(
        "cross_validation",
        cross_validate(
            split.train.len(),
            config.evaluation.cv_folds,
            config.seed_for(SeedStream::Folds),
            |tr, te| {
                let rows: Vec<&[f64]> = tr.iter().map(|&i| train_rows[i]).collect();
                let y: Vec<f64> = tr.iter().map(|&i| train_y[i]).collect();
                let m = train(&rows, &y, &schema, &train_cfg)?;
                let s: Vec<f64> = te.iter().map(|&i| m.predict_proba(train_rows[i])).collect();
                for (&i, &p) in te.iter().zip(&s) {
                    oof[i] = p;
                }
                let yt: Vec<f64> = te.iter().map(|&i| train_y[i]).collect();
                let w: Vec<f64> = yt.iter().map(|&y| (0.5 - y) * (0.5 - y)).collect();
                MetricReport::compute(&s, &yt, &w, DEFAULT_THRESHOLD, true)
            },
        ),
    )?;
    let ones = vec![1.0; split.train.len()];
    let target_ratio = stage(
        "baselines",
        precision_recall_ratio(&oof, &train_y, &ones, DEFAULT_THRESHOLD),
    )?;
    let flags_of = |ids: &[String]| -> Vec<Vec<f64>> {
        ids.iter()
            .map(|id| keyphrase_flags(&corpus.get(id).expect("labeled ticket in corpus").free_text()))
            .collect()
    };
    let keyphrase_k = match (config.evaluation.keyphrase_k, target_ratio) {
        (Some(k), _) => k,
        (None, Some(ratio)) => stage(
            "baselines",
            tune_keyphrase_k(&flags_of(&split.train), &train_y, &ones, ratio),
        )?,
        (None, None) => {
            log::warn!("main model's out-of-fold precision/recall undefined; keyphrase k = 12");
            12
        }
    };

    // Sampling weights for the holdout: inclusion in the holdout regressed
    // over every ticket.
    let hold_y = labels_of(&labels, &split.holdout);
    let weights = stage("sampling_weights", sampling_weights(&matrix, &split.holdout, &hold_y, config))?;

    let hold_rows = stage("evaluate", rows_of(&matrix, &split.holdout))?;
    let main_scores: Vec<f64> = hold_rows.iter().map(|r| model.predict_proba(r)).collect();
    let kp_scores: Vec<f64> = flags_of(&split.holdout)
        .iter()
        .map(|f| keyphrase_prefix_score(f, keyphrase_k))
        .collect();
    let zero_scores = vec![0.0; split.holdout.len()];
    let reps = config.evaluation.bootstrap_replicates;
    let boot_seed = config.seed_for(SeedStream::Bootstrap);
    let eval = |scores: &[f64]| eval_with(scores, &hold_y, &weights, config);
    let main_eval = stage("evaluate", eval(&main_scores))?;
    let kp_eval = stage("evaluate", eval(&kp_scores))?;
    let no_td_eval = stage("evaluate", eval(&zero_scores))?;
    let improve = |base: &[f64]| {
        improvement_ci(&main_scores, base, &hold_y, &weights.w, DEFAULT_THRESHOLD, reps, boot_seed)
    };
    let imp_kp = stage("evaluate", improve(&kp_scores))?;
    let imp_zero = stage("evaluate", improve(&zero_scores))?;

    let prevalence = stage("prevalence", estimate_corpus_prevalence(&matrix, &labels, config))?;

    let leaf_counts: Vec<usize> = model.trees.iter().flat_map(|t| t.leaf_counts()).collect();
    let report = RunReport {
        registry_version: matrix.registry.version.clone(),
        n_features: matrix.n_cols(),
        n_tickets: corpus.len(),
        n_labeled: labels.len(),
        n_train: split.train.len(),
        n_holdout: split.holdout.len(),
        n_holdout_positive: hold_y.iter().filter(|&&y| y > 0.5).count(),
        keyphrase_k,
        target_ratio,
        main: main_eval,
        keyphrase: kp_eval,
        no_td: no_td_eval,
        improvement_over_keyphrase: imp_kp,
        improvement_over_no_td: imp_zero,
        cross_validation: cv,
        prevalence,
        n_trees: model.trees.len(),
        max_leaves_per_tree: model.trees.iter().map(|t| t.n_leaves()).max().unwrap_or(1),
        min_leaf_count: leaf_counts.into_iter().min(),
    };

    let ids: Vec<&str> = split.holdout.iter().map(String::as_str).collect();
    let curves = stage("curves", cumulative_recall_curves(&main_scores, &hold_y, &ids))?;
    let kp_curve = stage("curves", cumulative_recall_curves(&kp_scores, &hold_y, &ids))?.model;
    let progress = label_progress_curve(&in_time.iter().map(|r| r.label).collect::<Vec<_>>());

    out.emit("metrics.json", to_pretty(&report)?)?;
    out.emit("metrics.csv", metrics_csv(&report))?;
    out.emit("prevalence.json", to_pretty(&report.prevalence)?)?;
    out.emit("importance.csv", importance_csv(&model, &matrix))?;
    out.emit("predictions.csv", predictions_csv(&split.holdout, &hold_y, &main_scores, &kp_scores, &weights))?;
    out.emit("curves.csv", {
        let mut buf = Vec::new();
        write_curves_csv(&[&curves.model, &curves.optimal, &curves.random], &mut buf)?;
        let mut text = String::from_utf8(buf).expect("csv is utf-8");
        // the keyphrase query's curve, under its own tag
        for (x, y) in &kp_curve.points {
            let _ = writeln!(text, "keyphrase,{x},{y}");
        }
        text
    })?;
    out.emit("progress.csv", {
        let mut buf = Vec::new();
        write_curves_csv(&[&progress], &mut buf)?;
        String::from_utf8(buf).expect("csv is utf-8")
    })?;
    write_json(&out.path("split.json"), &split)?;

    Ok(RunOutcome {
        report,
        model,
        split,
        out_dir,
        files: out.files,
    })
}

/// The output directory and the files written into it so far.
struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn emit(&mut self, name: &str, text: String) -> Result<()> {
        let p = self.path(name);
        write_text(&p, &text)
    }
}

fn to_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn metrics_csv(r: &RunReport) -> String {
    let mut out = String::from("model,weighting,metric,value,ci_lo,ci_hi\n");
    for (name, eval) in [("main", &r.main), ("keyphrase", &r.keyphrase), ("no_td", &r.no_td)] {
        for (weighting, rep) in [("weighted", &eval.weighted), ("unweighted", &eval.unweighted)] {
            for (metric, est) in [
                ("accuracy", rep.accuracy),
                ("precision", rep.precision),
                ("recall", rep.recall),
                ("auroc", rep.auroc),
            ] {
                let (lo, hi) = est.ci.unzip();
                let _ = writeln!(
                    out,
                    "{name},{weighting},{metric},{},{},{}",
                    fmt_opt(est.value),
                    fmt_opt(lo),
                    fmt_opt(hi)
                );
            }
        }
    }
    out
}

/// Per-feature gain importance, then per-family totals.
pub fn importance_csv(model: &GbmModel, m: &FeatureMatrix) -> String {
    let mut out = String::from("kind,name,family,importance\n");
    let mut totals: BTreeMap<FeatureFamily, f64> = BTreeMap::new();
    for (name, imp) in model.feature_importance() {
        let family = m.registry.family_of(&name).expect("model features come from the registry");
        *totals.entry(family).or_default() += imp;
        let _ = writeln!(out, "feature,{name},{},{imp}", family.label());
    }
    let mut fam: Vec<(FeatureFamily, f64)> = totals.into_iter().collect();
    fam.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (family, total) in fam {
        let _ = writeln!(out, "family,{},{},{total}", family.label(), family.label());
    }
    out
}

fn predictions_csv(ids: &[String], y: &[f64], main: &[f64], kp: &[f64], w: &EvalWeights) -> String {
    let mut out = String::from("ticket_id,label,score,keyphrase,w1,w2,w\n");
    for i in 0..ids.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            ids[i], y[i], main[i], kp[i], w.w1[i], w.w2[i], w.w[i]
        );
    }
    out
}

/// Corrected prevalence over every ticket in `m`: inclusion in the labeled
/// set is regressed on the features, and labels are weighted by the inverse
/// of the fitted inclusion rate.
pub fn estimate_corpus_prevalence(
    m: &FeatureMatrix,
    labels: &BTreeMap<String, f64>,
    config: &PipelineConfig,
) -> Result<PrevalenceEstimate> {
    let all_rows: Vec<&[f64]> = m.rows.iter().map(Vec::as_slice).collect();
    let labeled_idx: Vec<usize> = (0..m.n_rows()).filter(|&i| labels.contains_key(&m.ids[i])).collect();
    let labeled_y: Vec<f64> = labeled_idx.iter().map(|&i| labels[&m.ids[i]]).collect();
    let schema = Schema::of(m);
    let train_cfg = config.train_config();
    let seed = config.seed_for(SeedStream::Prevalence);
    let refit = config.evaluation.prevalence_refit_replicates;
    if refit > 0 {
        let mut p = estimate_prevalence_refit(&all_rows, &labeled_idx, &labeled_y, &schema, &train_cfg, refit, seed)?;
        p.n_total = m.n_rows();
        return Ok(p);
    }
    let set: BTreeSet<usize> = labeled_idx.iter().copied().collect();
    let included: Vec<bool> = (0..m.n_rows()).map(|i| set.contains(&i)).collect();
    let fit = estimate_sampling_weights(&all_rows, &included, &schema, &train_cfg)?;
    let probs: Vec<f64> = labeled_idx
        .iter()
        .map(|&i| fit.probs[i].clamp(MIN_SAMPLING_PROB, 1.0))
        .collect();
    estimate_prevalence(&labeled_y, &probs, m.n_rows(), config.evaluation.bootstrap_replicates, seed)
}

/// Weighted and unweighted metrics of `scores` on labeled tickets `ids`
/// (sorted, all present in `m`). Sampling weights come from regressing
/// membership in `ids` over every ticket of `m`.
pub fn evaluate_scores(
    m: &FeatureMatrix,
    ids: &[String],
    labels: &BTreeMap<String, f64>,
    scores: &[f64],
    config: &PipelineConfig,
) -> Result<(ModelEval, EvalWeights)> {
    let y = labels_of(labels, ids);
    let weights = sampling_weights(m, ids, &y, config)?;
    Ok((eval_with(scores, &y, &weights, config)?, weights))
}

fn sampling_weights(m: &FeatureMatrix, ids: &[String], y: &[f64], config: &PipelineConfig) -> Result<EvalWeights> {
    let all_rows: Vec<&[f64]> = m.rows.iter().map(Vec::as_slice).collect();
    let members: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let included: Vec<bool> = m.ids.iter().map(|id| members.contains(id.as_str())).collect();
    let fit = estimate_sampling_weights(&all_rows, &included, &Schema::of(m), &config.train_config())?;
    EvalWeights::new(fit.w1_of(&included), y)
}

fn eval_with(scores: &[f64], y: &[f64], weights: &EvalWeights, config: &PipelineConfig) -> Result<ModelEval> {
    let reps = config.evaluation.bootstrap_replicates;
    let seed = config.seed_for(SeedStream::Bootstrap);
    let unit = vec![1.0; y.len()];
    Ok(ModelEval {
        weighted: MetricReport::with_bootstrap(scores, y, &weights.w, DEFAULT_THRESHOLD, true, reps, seed)?,
        unweighted: MetricReport::with_bootstrap(scores, y, &unit, DEFAULT_THRESHOLD, false, reps, seed)?,
    })
}

/// Loads a model file and checks it against a feature matrix.
pub fn load_model_for(path: &Path, m: &FeatureMatrix) -> Result<GbmModel> {
    let model = GbmModel::load(path)?;
    model.check_schema(&m.names(), &m.registry.version)?;
    Ok(model)
}
