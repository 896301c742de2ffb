//! `dep`: analyze a tokenized dataset's vocabulary usage, prune an embedding
//! matrix to it, restore learned rows afterwards and report the savings.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "dep", version, about = "Dataset-driven embedding matrix pruning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vocabulary usage statistics and the distinct-token growth curve.
    Analyze(AnalyzeArgs),
    /// Reduce an embedding matrix and a dataset to the used vocabulary.
    Prune(PruneArgs),
    /// Scatter a learned reduced matrix back into the full matrix.
    Restore(RestoreArgs),
    /// Parameter savings of a remap for a model configuration.
    Report(ReportArgs),
    /// Parameter breakdown of a model configuration.
    CountParams(CountParamsArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Tokenized dataset, text (one sequence of ids per line) or binary DEPT.
    #[arg(long)]
    dataset: PathBuf,
    /// Vocabulary size for text datasets; taken from the embeddings or the
    /// model config when omitted.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Number of slices scanned in parallel; results never depend on it.
    #[arg(long, default_value_t = default_partitions(), value_parser = clap::value_parser!(u32).range(1..))]
    partitions: u32,
}

fn default_partitions() -> u32 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u32)
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Embedding matrix whose row count gives the vocabulary size.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Model config JSON file or preset name, for the vocabulary size.
    #[arg(long)]
    model_config: Option<String>,
    /// Growth-curve sampling: `pow2`, `all`, `every:N` or a list `1,10,100`.
    #[arg(long, default_value = "pow2")]
    checkpoints: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Full embedding matrix (DEPE).
    #[arg(long)]
    embeddings: PathBuf,
    /// Dense id order: `ascending-id` or `frequency-descending`.
    #[arg(long, default_value = "ascending-id")]
    ordering: String,
    /// Token ids kept even when absent from the dataset, e.g. `0,101,102`.
    #[arg(long, value_delimiter = ',')]
    keep: Vec<u32>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    /// Original full embedding matrix (DEPE).
    #[arg(long)]
    embeddings: PathBuf,
    /// Learned reduced matrix (DEPE).
    #[arg(long)]
    learned: PathBuf,
    /// Remap JSON written by `prune`.
    #[arg(long)]
    remap: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Remap JSON written by `prune`.
    #[arg(long)]
    remap: Option<PathBuf>,
    /// Model config JSON file or preset name.
    #[arg(long)]
    model_config: Option<String>,
    /// Dataset to check against the remap.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Full matrix to check against the config.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Reduced matrix to check against the remap.
    #[arg(long)]
    pruned: Option<PathBuf>,
    /// Timestamp stored in the report; defaults to SOURCE_DATE_EPOCH.
    #[arg(long)]
    timestamp: Option<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    partitions: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CountParamsArgs {
    /// Model config JSON file or preset name.
    #[arg(long)]
    model_config: String,
    /// Write `params.json` here instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DEP_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Prune(a) => commands::prune(a),
        Command::Restore(a) => commands::restore(a),
        Command::Report(a) => commands::report(a),
        Command::CountParams(a) => commands::count_params(a),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error: ")));
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
