mod commands;
mod config;
mod lock;

use clap::{ArgGroup, Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use titlenorm::encoder::EmbedMode;
use titlenorm::training::TrainingError;

#[derive(Debug, Parser)]
#[command(
    name = "titlenorm",
    version,
    about = "Job-title normalization with a title/skills dual encoder",
    args_override_self = true
)]
pub struct Cli {
    /// Flat `key = value` config file; command-line flags take precedence
    #[arg(long, global = true, display_order = 100, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for shuffling, splits and synthetic data
    #[arg(long, global = true, display_order = 100, value_name = "N", default_value_t = 0)]
    pub data_seed: u64,
    /// Seed for weight initialization, dropout and baselines
    #[arg(long, global = true, display_order = 100, value_name = "N", default_value_t = 0)]
    pub model_seed: u64,
    /// Only print command results, no progress lines
    #[arg(long, global = true, display_order = 100)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw postings, extract skills and drop duplicates
    Preprocess(PreprocessArgs),
    /// Print corpus statistics as JSON
    Stats(StatsArgs),
    /// Train the dual encoder on (title, skills) pairs
    Train(TrainArgs),
    /// Embed the records of a JSONL file
    Embed(EmbedArgs),
    /// Embed normalized titles into a search index
    Index(IndexArgs),
    /// Find the closest normalized titles for a job title
    Search(SearchArgs),
    /// Score encoders on a benchmark with Recall@1/5/10
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus from a random taxonomy
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    /// Raw postings, one JSON object per line
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Cleaned postings (JSONL)
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Skill gazetteer, one skill per line [default: built-in list]
    #[arg(long, value_name = "PATH")]
    pub gazetteer: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct StatsArgs {
    /// Postings (JSONL)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Training postings (JSONL); records without skills are skipped
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Checkpoint to write
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Vocabulary file [default: <output>.vocab]
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Training log (JSONL) [default: <output>.log.jsonl]
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Benchmark (JSONL) used as the validation probe
    #[arg(long, value_name = "PATH")]
    pub benchmark: Option<PathBuf>,
    /// Continue from this checkpoint, reusing its vocabulary
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
    /// Transformer width
    #[arg(long, value_name = "N", default_value_t = 64)]
    pub hidden_dim: usize,
    /// Transformer blocks
    #[arg(long, value_name = "N", default_value_t = 2)]
    pub num_layers: usize,
    /// Attention heads
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub num_heads: usize,
    /// Feed-forward width
    #[arg(long, value_name = "N", default_value_t = 256)]
    pub ffn_dim: usize,
    /// Embedding size after the pooling layer
    #[arg(long, value_name = "N", default_value_t = 32)]
    pub pooled_dim: usize,
    /// Dropout rate on embeddings and residual branches
    #[arg(long, value_name = "RATE", default_value_t = 0.0)]
    pub dropout: f32,
    /// Minimum token count for the vocabulary
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub min_frequency: usize,
    /// Pairs per batch (before same-title deduplication)
    #[arg(long, value_name = "N", default_value_t = 32)]
    pub batch_size: usize,
    /// Passes over the training split
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub epochs: usize,
    /// AdamW learning rate
    #[arg(long, value_name = "LR", default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Similarity scale inside the softmax
    #[arg(long, value_name = "S", default_value_t = 20.0)]
    pub scale: f64,
    /// Decoupled weight decay
    #[arg(long, value_name = "W", default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Share of pairs held out for validation
    #[arg(long, value_name = "F", default_value_t = 0.05)]
    pub validation_fraction: f64,
    /// Validate and checkpoint every N steps (0: only at the end)
    #[arg(long, value_name = "N", default_value_t = 100)]
    pub checkpoint_every: usize,
    /// Also train skills-to-title retrieval
    #[arg(long)]
    pub bidirectional: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EmbedArgs {
    /// Checkpoint to load
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Vocabulary file [default: <checkpoint>.vocab]
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Postings to embed (JSONL)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output JSONL [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// title, skills or combined
    #[arg(long, value_name = "MODE", default_value_t = EmbedMode::Title)]
    pub mode: EmbedMode,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
#[command(group(ArgGroup::new("source").required(true).args(["labels", "benchmark"])))]
pub struct IndexArgs {
    /// Checkpoint to load
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Vocabulary file [default: <checkpoint>.vocab]
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Normalized titles, one per line
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Take the distinct normalized titles of this benchmark (JSONL)
    #[arg(long, value_name = "PATH")]
    pub benchmark: Option<PathBuf>,
    /// Index file to write
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SearchArgs {
    /// Checkpoint to load
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Vocabulary file [default: <checkpoint>.vocab]
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Index built with the same checkpoint
    #[arg(long, value_name = "PATH")]
    pub index: PathBuf,
    /// Job title to normalize
    #[arg(long, value_name = "TEXT")]
    pub query: String,
    /// Comma-separated skills; switches to combined mode when non-empty
    #[arg(long, value_name = "LIST")]
    pub skills: Option<String>,
    /// Results to print
    #[arg(long, value_name = "N", default_value_t = 10)]
    pub k: usize,
    /// Search even if the index was built with another checkpoint
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    /// Benchmark postings with normalized titles (JSONL)
    #[arg(long, value_name = "PATH")]
    pub benchmark: PathBuf,
    /// Checkpoint to score (repeatable); its vocabulary is <checkpoint>.vocab
    #[arg(long = "checkpoint", value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
    /// Also score a random static word-vector baseline of this size (0: off)
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub static_baseline_dim: usize,
    /// Comma-separated embedding modes
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "title,combined")]
    pub modes: Vec<EmbedMode>,
    /// External Recall@1,5,10 to compute improvements against, e.g. 0.225,0.386,0.46
    #[arg(long, value_name = "R1,R5,R10")]
    pub reference: Option<String>,
    /// Name of the external reference in the report
    #[arg(long, value_name = "NAME", default_value = "reference")]
    pub reference_name: String,
    /// Report JSON; the text table goes next to it with a .txt extension
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Corpus to write (JSONL)
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Also write a benchmark drawn from the same taxonomy
    #[arg(long, value_name = "PATH")]
    pub benchmark_output: Option<PathBuf>,
    /// Benchmark records per family
    #[arg(long, value_name = "N", default_value_t = 20)]
    pub benchmark_records_per_family: usize,
    /// Occupation families
    #[arg(long, value_name = "N", default_value_t = 10)]
    pub families: usize,
    /// Skill pool size per family
    #[arg(long, value_name = "N", default_value_t = 8)]
    pub skills_per_family: usize,
    /// Corpus records per family
    #[arg(long, value_name = "N", default_value_t = 20)]
    pub records_per_family: usize,
    /// Fewest skills per record
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub min_skills: usize,
    /// Most skills per record
    #[arg(long, value_name = "N", default_value_t = 6)]
    pub max_skills: usize,
    /// Probability that a skill comes from another family
    #[arg(long, value_name = "P", default_value_t = 0.0)]
    pub noise: f64,
    /// Synonymous titles per family
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub title_variants: usize,
    /// Family pairs sharing one ambiguous title
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub ambiguous_pairs: usize,
    /// Probability of a seniority prefix on a title
    #[arg(long, value_name = "P", default_value_t = 0.5)]
    pub modifier_rate: f64,
    /// Share of records with a non-English description
    #[arg(long, value_name = "P", default_value_t = 0.0)]
    pub foreign_rate: f64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .any(|c| matches!(c.downcast_ref::<TrainingError>(), Some(TrainingError::NonFiniteGradient { .. })));
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let args = match config::apply_config(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
