//! `debtscan`: command-line front end for the technical-debt detector.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "debtscan", version, about = "Find technical-debt discussions in issue-tracker tickets")]
pub struct Cli {
    /// TOML configuration file; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config; default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ticket JSONL (overrides the config; default: synthetic corpus).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Label journal JSONL (overrides the config).
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Pretrained text-format word embedding (overrides the config).
    #[arg(long, global = true)]
    pub pretrained: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a ticket JSONL file and write the accepted tickets.
    Ingest {
        input: PathBuf,
    },
    /// Write a synthetic corpus, its ground truth and a pretrained embedding.
    GenSynthetic {
        #[arg(long)]
        n_tickets: Option<usize>,
        #[arg(long)]
        td_rate: Option<f64>,
        /// Also label this many uniformly drawn tickets with the simulated rater.
        #[arg(long, default_value_t = 0)]
        label: usize,
    },
    /// Train the word and document embeddings on all corpus text.
    TrainEmbeddings,
    /// Build the feature matrix for every ticket.
    Featurize,
    /// Train the model on every labeled ticket.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Score tickets with a trained model.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Weighted and unweighted metrics of a model on the labeled tickets.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Naive and corrected technical-debt prevalence.
    Prevalence {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Draw the next tickets to label.
    SampleNext {
        #[arg(short, long, default_value_t = 10)]
        n: usize,
        /// Without a model every unlabeled ticket is equally likely.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Print the model's trees.
    DumpTrees {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Cumulative recall curves of a model on the labeled tickets.
    Curves {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Run every stage and write the full report.
    RunAll,
    /// Start the label service.
    Serve {
        #[arg(long, env = "DEBTSCAN_LISTEN", default_value = debtscan_service::DEFAULT_LISTEN)]
        listen: std::net::SocketAddr,
        /// Label journal (default: `<out>/labels.jsonl`).
        #[arg(long)]
        journal: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}
