use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "seqlab", version, about = "Train, evaluate and run BiLSTM sequence labelers (softmax, CRF, label attention)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write the best checkpoint plus a per-epoch report.
    Train(TrainArgs),
    /// Score a model on labeled data.
    Eval(EvalArgs),
    /// Tag raw text, one whitespace-tokenized sentence per line.
    Tag(TagArgs),
    /// Time CRF and LAN decoding over a label-count grid with exact operation counts.
    Bench(BenchArgs),
    /// Write a synthetic long-range tagging corpus in column format.
    Synth(SynthArgs),
}

#[derive(Debug, Parser)]
#[command(name = "train", args_override_self = true)]
pub struct TrainArgs {
    /// Configuration file of key=value lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Optional held-out set scored with the best model after training.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output path of the best model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-epoch TSV report (default: <model>.report.tsv).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// softmax, crf or lan.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// acc or span-f1.
    #[arg(long)]
    pub metric: Option<String>,
    /// Tagging scheme for span-f1: bio or bioes.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of BiLSTM layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Word-level hidden size d_h (both directions together).
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub char_dim: Option<usize>,
    /// Character BiLSTM size per direction; 0 disables the character encoder.
    #[arg(long)]
    pub char_hidden: Option<usize>,
    /// Minimum training frequency for a word to enter the vocabulary.
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    /// Sentences per mini-batch.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stop once the dev metric reaches this value.
    #[arg(long)]
    pub target: Option<f64>,
    /// Pretrained word vectors, one `word v1 ... vd` line each.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Write the trained label embeddings (LAN only).
    #[arg(long)]
    pub export_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled data in column format.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "acc")]
    pub metric: String,
    #[arg(long, default_value = "bio")]
    pub scheme: String,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input text (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Append the top-k label probabilities to every token line.
    #[arg(long)]
    pub with_probs: bool,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    /// Write per-layer attention matrices as JSON lines (LAN only).
    #[arg(long)]
    pub export_attention: Option<PathBuf>,
    /// Write the label embeddings (LAN only).
    #[arg(long)]
    pub export_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// crf, lan or both.
    #[arg(long, default_value = "both")]
    pub arch: String,
    /// Comma-separated label counts.
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,400")]
    pub labels: Vec<usize>,
    /// Sentence length.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub hidden: usize,
    #[arg(long, default_value_t = 21)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// TSV report path (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sentences: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub min_len: usize,
    #[arg(long, default_value_t = 16)]
    pub max_len: usize,
    /// Most ambiguous tokens per sentence.
    #[arg(long, default_value_t = 2)]
    pub max_ambiguous: usize,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
