//! `mpe`: build multiple-premise entailment data, score voting baselines,
//! and train and evaluate entailment models.

mod commands;
mod files;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpe_core::dataset::Split;
use mpe_core::models::{ModelKind, Preset};

use files::Paths;

#[derive(Debug, Parser)]
#[command(name = "mpe", version, about = "Multiple-premise entailment toolkit")]
struct Cli {
    /// Directory that relative input and output paths are resolved against.
    #[arg(long, global = true, env = "MPE_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the phrase generalization graph over caption files.
    BuildGraph(BuildGraphArgs),
    /// Generate entailment items from caption files.
    BuildDataset(BuildDatasetArgs),
    /// Corpus statistics over labeled items.
    Stats(StatsArgs),
    /// Attach crowd judgments and resolve split votes.
    Adjudicate(AdjudicateArgs),
    /// Score the voting baselines from per-premise labels.
    Vote(VoteArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a trained model.
    Eval(EvalArgs),
    /// Finite-difference gradient check of a small random model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct CaptionFiles {
    /// Training captions: `group <TAB> index <TAB> caption`.
    #[arg(long)]
    pub captions: PathBuf,
    /// Development captions.
    #[arg(long)]
    pub dev_captions: Option<PathBuf>,
    /// Test captions.
    #[arg(long)]
    pub test_captions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    #[command(flatten)]
    pub captions: CaptionFiles,
    #[arg(long, default_value = "graph.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    #[command(flatten)]
    pub captions: CaptionFiles,
    /// Precomputed graph; built from the captions when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = Split::Train)]
    pub split: Split,
    /// Maximum word overlap between hypothesis and premises.
    #[arg(long, default_value_t = 0.5)]
    pub overlap_max: f64,
    #[arg(long, default_value_t = 8000)]
    pub n_items: usize,
    /// Minimum captions (train plus target split) reducing to a hypothesis.
    #[arg(long, default_value_t = 2)]
    pub min_support: usize,
    /// Minimum captions in the target split reducing to a hypothesis.
    #[arg(long, default_value_t = 1)]
    pub min_split_support: usize,
    #[arg(long, default_value_t = 0.5)]
    pub related_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "items.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Crowd judgments: `item_id <TAB> five labels`.
    #[arg(long)]
    pub judgments: Option<PathBuf>,
    /// Decisions: `item_id <TAB> label`. Without it, flagged items are
    /// reviewed interactively.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Pair labels: `item_id <TAB> four labels`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Named model and training settings: lstm-mpe, se-mpe, attn-mpe or
    /// snli-pretrain.
    #[arg(long, conflicts_with = "model")]
    pub preset: Option<Preset>,
    /// Model with default settings: lstm, attention or se.
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Labeled training items.
    #[arg(long)]
    pub train: PathBuf,
    /// Development items for model selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Single-premise items trained on before `--train`.
    #[arg(long)]
    pub pretrain: Option<PathBuf>,
    /// Word vectors, one `word v1 .. vd` per line.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep word vectors fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    /// Word vector size; taken from `--embeddings` when given.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// One or more comma-separated values; several values run a grid.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub keep_prob: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lr: Vec<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tokens seen fewer times map to the unknown word.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Keep the final parameters instead of the best dev epoch.
    #[arg(long)]
    pub keep_last: bool,
    #[arg(long, default_value = "model.ckpt")]
    pub out: PathBuf,
    /// Epoch log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    /// Report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-item predictions as JSON lines.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// lstm, attention or se.
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let paths = Paths { data_dir: cli.data_dir };
    let result = match cli.command {
        Command::BuildGraph(a) => commands::build_graph(&paths, a),
        Command::BuildDataset(a) => commands::build_dataset(&paths, a),
        Command::Stats(a) => commands::stats(&paths, a),
        Command::Adjudicate(a) => commands::adjudicate(&paths, a),
        Command::Vote(a) => commands::vote(&paths, a),
        Command::Train(a) => commands::train(&paths, a),
        Command::Eval(a) => commands::eval(&paths, a),
        Command::Gradcheck(a) => commands::gradcheck(&paths, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if files::is_invalid(&e) { 1 } else { 2 })
        }
    }
}
