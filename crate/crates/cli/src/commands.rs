use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use debtscan::corpus::synthetic::{generate_synthetic_corpus, synthetic_pretrained_embedding};
use debtscan::corpus::ingest_jsonl;
use debtscan::evaluation::{cumulative_recall_curves, write_curves_csv, Estimate};
use debtscan::features::FeatureMatrix;
use debtscan::gbm::GbmModel;
use debtscan::pipeline::stages::{self, Embeddings};
use debtscan::pipeline::{
    estimate_corpus_prevalence, evaluate_scores, load_model_for, run_end_to_end, sample_next_batch,
    simulate_uniform_labels, train_main, ModelEval, PipelineConfig, SeedStream,
};

use crate::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration.
    Usage(String),
    /// Inputs that cannot be processed.
    Data(debtscan::Error),
    /// Anything else (runtime, network).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<debtscan::Error> for CliError {
    fn from(e: debtscan::Error) -> Self {
        CliError::Data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    if let Some(p) = &cli.corpus {
        cfg.paths.corpus = Some(p.clone());
    }
    if let Some(p) = &cli.labels {
        cfg.paths.labels = Some(p.clone());
    }
    if let Some(p) = &cli.pretrained {
        cfg.paths.pretrained = Some(p.clone());
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        CliError::Data(debtscan::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn features(cfg: &PipelineConfig, path: &Option<PathBuf>) -> Result<FeatureMatrix> {
    let path = path.clone().unwrap_or_else(|| cfg.out_dir().join("features.csv"));
    Ok(FeatureMatrix::load_csv(path)?)
}

fn model_path(cfg: &PipelineConfig, path: &Option<PathBuf>) -> PathBuf {
    path.clone().unwrap_or_else(|| cfg.out_dir().join("model.json"))
}

/// Labels of labeled tickets that have feature rows, with their sorted ids.
fn labeled(cfg: &PipelineConfig, m: &FeatureMatrix) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
    let inputs = stages::load_corpus(cfg)?;
    let labels = stages::label_map(&inputs.corpus);
    if labels.is_empty() {
        return Err(CliError::Data(debtscan::Error::InvalidInput(
            "no labels: pass --labels or set paths.labels".into(),
        )));
    }
    if let Some(id) = labels.keys().find(|id| m.row(id).is_none()) {
        return Err(CliError::Data(debtscan::Error::UnknownTicket(id.clone())));
    }
    let ids = labels.keys().cloned().collect();
    Ok((labels, ids))
}

fn fmt_est(e: &Estimate) -> String {
    match (e.value, e.ci) {
        (Some(v), Some((lo, hi))) => format!("{v:.3} ({lo:.3}, {hi:.3})"),
        (Some(v), None) => format!("{v:.3}"),
        (None, _) => "NA".into(),
    }
}

fn summary(name: &str, e: &ModelEval) -> String {
    let mut s = String::new();
    for (tag, r) in [("weighted", &e.weighted), ("unweighted", &e.unweighted)] {
        let _ = writeln!(
            s,
            "{name:<10} {tag:<10} acc {}  prec {}  rec {}  auroc {}",
            fmt_est(&r.accuracy),
            fmt_est(&r.precision),
            fmt_est(&r.recall),
            fmt_est(&r.auroc)
        );
    }
    s
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    match &cli.command {
        Command::Ingest { input } => {
            let ingested = ingest_jsonl(input)?;
            for s in &ingested.skipped {
                eprintln!("skipped {}:{}: {}", input.display(), s.line, s.reason);
            }
            println!("{} tickets accepted, {} lines skipped", ingested.corpus.len(), ingested.skipped.len());
            let dir = out_dir(&cfg)?;
            write(&dir.join("corpus.jsonl"), &ingested.corpus.to_jsonl_string())
        }
        Command::GenSynthetic { n_tickets, td_rate, label } => {
            let mut cfg = cfg;
            if let Some(n) = n_tickets {
                cfg.synthetic.n_tickets = *n;
            }
            if let Some(r) = td_rate {
                cfg.synthetic.td_rate = *r;
            }
            let (corpus, truth) = generate_synthetic_corpus(&cfg.synthetic_config())?;
            let dir = out_dir(&cfg)?;
            write(&dir.join("corpus.jsonl"), &corpus.to_jsonl_string())?;
            let mut t = String::from("ticket_id,td\n");
            for (id, v) in &truth {
                let _ = writeln!(t, "{id},{v}");
            }
            write(&dir.join("truth.csv"), &t)?;
            let emb = synthetic_pretrained_embedding(cfg.features.pretrained_dim, cfg.seed);
            emb.save_text(dir.join("pretrained.txt"))?;
            println!("wrote {}", dir.join("pretrained.txt").display());
            if *label > 0 {
                let records = simulate_uniform_labels(&truth, *label, cfg.seed_for(SeedStream::Labels))?;
                let mut text = String::new();
                for r in &records {
                    text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Internal(e.to_string()))?);
                    text.push('\n');
                }
                write(&dir.join("labels.jsonl"), &text)?;
            }
            Ok(())
        }
        Command::TrainEmbeddings => {
            let inputs = stages::load_corpus(&cfg)?;
            let tokens = stages::tokenize_corpus(&inputs.corpus);
            let emb = Embeddings::train(&tokens, &cfg)?;
            let dir = out_dir(&cfg)?;
            emb.save(&dir)?;
            println!(
                "trained {} word vectors and {} document vectors into {}",
                emb.words.embedding.len(),
                emb.docs.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Featurize => {
            let inputs = stages::load_corpus(&cfg)?;
            let pretrained = stages::load_pretrained_for(&cfg, &inputs.corpus)?;
            let dir = out_dir(&cfg)?;
            let emb = Embeddings::load(&dir).map_err(|e| {
                CliError::Data(debtscan::Error::InvalidInput(format!(
                    "no embeddings in {} ({e}); run train-embeddings first",
                    dir.display()
                )))
            })?;
            let ngrams = if cfg.features.ngrams {
                let tokens = stages::tokenize_corpus(&inputs.corpus);
                let ids = stages::label_map(&inputs.corpus).into_keys().collect();
                Some(stages::fit_ngrams(&tokens, &ids))
            } else {
                None
            };
            let ctx = stages::build_context(pretrained, &emb, ngrams)?;
            let m = FeatureMatrix::build(inputs.corpus.tickets(), &ctx);
            m.save_csv(dir.join("features.csv"))?;
            println!("wrote {} ({} x {})", dir.join("features.csv").display(), m.n_rows(), m.n_cols());
            Ok(())
        }
        Command::Train { features: f } => {
            let m = features(&cfg, f)?;
            let (labels, ids) = labeled(&cfg, &m)?;
            let model = train_main(&m, &labels, &ids, &cfg.train_config())?;
            let dir = out_dir(&cfg)?;
            write(&dir.join("model.json"), &model.to_json()?)?;
            write(&dir.join("trees.txt"), &model.dump_trees())
        }
        Command::Predict { model, features: f } => {
            let m = features(&cfg, f)?;
            let model = load_model_for(&model_path(&cfg, model), &m)?;
            let scores = model.predict_matrix(&m)?;
            let mut out = String::from("ticket_id,probability\n");
            for (id, p) in m.ids.iter().zip(&scores) {
                let _ = writeln!(out, "{id},{p}");
            }
            write(&out_dir(&cfg)?.join("predictions.csv"), &out)
        }
        Command::Evaluate { model, features: f } => {
            let m = features(&cfg, f)?;
            let model = load_model_for(&model_path(&cfg, model), &m)?;
            let (labels, ids) = labeled(&cfg, &m)?;
            let rows = m.select(&ids.iter().map(String::as_str).collect::<Vec<_>>())?;
            let scores: Vec<f64> = rows.iter().map(|r| model.predict_proba(r)).collect();
            let (eval, _) = evaluate_scores(&m, &ids, &labels, &scores, &cfg)?;
            print!("{}", summary("model", &eval));
            write(&out_dir(&cfg)?.join("evaluation.json"), &json(&eval)?)
        }
        Command::Prevalence { features: f } => {
            let m = features(&cfg, f)?;
            let (labels, _) = labeled(&cfg, &m)?;
            let p = estimate_corpus_prevalence(&m, &labels, &cfg)?;
            println!(
                "naive {:.3}  corrected {:.3} ({:.3}, {:.3})  over {} labeled of {} tickets",
                p.naive_rate, p.corrected_rate, p.ci_lo, p.ci_hi, p.n_labeled, p.n_total
            );
            write(&out_dir(&cfg)?.join("prevalence.json"), &json(&p)?)
        }
        Command::SampleNext { n, model, features: f } => {
            let m = features(&cfg, f)?;
            let inputs = stages::load_corpus(&cfg)?;
            let labels = stages::label_map(&inputs.corpus);
            let model: Option<GbmModel> = match model {
                Some(p) => Some(load_model_for(p, &m)?),
                None => None,
            };
            let pool: Vec<(&str, f64)> = m
                .ids
                .iter()
                .zip(&m.rows)
                .filter(|(id, _)| !labels.contains_key(*id))
                .map(|(id, row)| (id.as_str(), model.as_ref().map_or(1.0, |md| md.predict_proba(row))))
                .collect();
            let n = (*n).min(pool.len());
            let batch = sample_next_batch(&pool, n, cfg.active_learning.floor, cfg.seed_for(SeedStream::Sampler))?;
            let probs: BTreeMap<&str, f64> = pool.into_iter().collect();
            for id in batch {
                if model.is_some() {
                    println!("{id}\t{:.4}", probs[id.as_str()]);
                } else {
                    println!("{id}");
                }
            }
            Ok(())
        }
        Command::DumpTrees { model } => {
            let model = GbmModel::load(model_path(&cfg, model))?;
            print!("{}", model.dump_trees());
            Ok(())
        }
        Command::Curves { model, features: f } => {
            let m = features(&cfg, f)?;
            let model = load_model_for(&model_path(&cfg, model), &m)?;
            let (labels, ids) = labeled(&cfg, &m)?;
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let scores: Vec<f64> = m.select(&refs)?.iter().map(|r| model.predict_proba(r)).collect();
            let y: Vec<f64> = ids.iter().map(|id| labels[id]).collect();
            let c = cumulative_recall_curves(&scores, &y, &refs)?;
            let mut buf = Vec::new();
            write_curves_csv(&[&c.model, &c.optimal, &c.random], &mut buf)?;
            write(&out_dir(&cfg)?.join("curves.csv"), &String::from_utf8_lossy(&buf))
        }
        Command::RunAll => {
            let outcome = run_end_to_end(&cfg)?;
            let r = &outcome.report;
            println!(
                "{} tickets, {} labeled ({} train / {} holdout), {} features",
                r.n_tickets, r.n_labeled, r.n_train, r.n_holdout, r.n_features
            );
            print!("{}", summary("main", &r.main));
            print!("{}", summary(&format!("keyphrase{}", r.keyphrase_k), &r.keyphrase));
            print!("{}", summary("no-td", &r.no_td));
            let p = &r.prevalence;
            println!(
                "prevalence naive {:.3}  corrected {:.3} ({:.3}, {:.3})",
                p.naive_rate, p.corrected_rate, p.ci_lo, p.ci_hi
            );
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(())
        }
        Command::Serve { listen, journal } => {
            let journal = match journal {
                Some(j) => j.clone(),
                None => out_dir(&cfg)?.join("labels.jsonl"),
            };
            let state = debtscan_service::AppState::from_pipeline(&cfg, journal)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            rt.block_on(debtscan_service::serve(*listen, state))
                .map_err(|e| CliError::Internal(format!("server on {listen}: {e}")))
        }
    }
}

