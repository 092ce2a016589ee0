//! `tmeta`: transferability-metric selection from the command line.
//!
//! Every subcommand is a thin shell over the library: load inputs, call one
//! core operation, write outputs. Exit codes are part of the contract:
//! 0 success, 1 usage or configuration error, 2 unreadable or malformed
//! data, 3 runtime failure (training, endpoint, output i/o). The resolved
//! configuration, seed included, goes to stderr on every run so logs can
//! reproduce any invocation.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use run::Failure;

#[derive(Parser, Debug)]
#[command(name = "tmeta", version, about = "Task-aware selection of transferability metrics")]
struct Cli {
    /// Worker threads for parallel sections; defaults to the machine's cores.
    /// Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn text descriptions into an embedding corpus.
    Embed {
        /// Description records, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// Embedding service URL; TMETA_EMBED_ENDPOINT is the fallback.
        #[arg(long)]
        endpoint: Option<String>,
        /// Offline source corpus to copy vectors from instead of a service.
        #[arg(long)]
        from_file: Option<PathBuf>,
        /// Where the corpus JSONL goes.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one model zoo with one metric and print the scores.
    Score {
        /// Zoo manifest naming the dataset and each model's input files.
        #[arg(long)]
        zoo: PathBuf,
        /// Metric name; anything unrecognized is looked up externally.
        #[arg(long)]
        metric: String,
        /// Long-form CSV of precomputed external metric scores.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the dataset-by-metric rank-correlation table from model zoos.
    TauTable {
        /// Zoo manifest with per-model target accuracies; repeatable.
        #[arg(long, required = true)]
        zoo: Vec<PathBuf>,
        /// Comma-separated metric names forming the table columns.
        #[arg(long, required = true, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Long-form CSV of precomputed external metric scores.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where the table CSV goes.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a selector on a benchmark table and save the model.
    Train {
        /// Benchmark table CSV (dataset,metric,tau_w).
        #[arg(long)]
        table: PathBuf,
        /// Embedding corpus covering the table's datasets and metrics.
        #[arg(long)]
        embeddings: PathBuf,
        /// Strategy to fit: metarank_gbdt, metarank_mlp, global_best,
        /// argosmart_1nn, isac_kmeans, alors_mf, ncf_mlp, random, or fixed.
        #[arg(long)]
        selector: String,
        /// Metric name the fixed strategy always picks.
        #[arg(long)]
        metric: Option<String>,
        /// JSON file overriding the default strategy parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated metric columns to train on; default is all.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where the model JSON goes.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank candidate metrics for a dataset with a saved model.
    Rank {
        /// Model JSON written by train.
        #[arg(long)]
        model: PathBuf,
        /// Dataset name found in the corpus, or an inline JSON vector.
        #[arg(long)]
        dataset_embedding: String,
        /// Corpus whose metric records become the candidates.
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Leave-one-dataset-out evaluation of selection strategies.
    Lodo {
        /// Benchmark table CSV (dataset,metric,tau_w).
        #[arg(long)]
        table: PathBuf,
        /// Embedding corpus covering the table's datasets and metrics.
        #[arg(long)]
        embeddings: PathBuf,
        /// Evaluation config JSON: strategies, search grid, seed.
        #[arg(long)]
        config: PathBuf,
        /// Directory for the report CSVs and JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite the report files from a saved evaluation report.
    Report {
        /// report.json from a previous evaluation.
        #[arg(long)]
        report: PathBuf,
        /// Directory for the report CSVs and JSON.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    if let Err(f) = configure_threads(cli.threads) {
        eprintln!("error: {}", f.message());
        return ExitCode::from(f.code());
    }
    match run::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}
