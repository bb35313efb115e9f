//! Command-line surface. Tunables on `run` are optional so a `--config`
//! key=value file can supply them, with explicit flags taking precedence.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "icufuse",
    version,
    about = "Multimodal ICU outcome prediction on synthetic cohorts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[allow(clippy::large_enum_variant)]
#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic cohort (time series, entities, labels files).
    Synth(SynthArgs),
    /// Train an embedding table from a cohort's entities file.
    Embed(EmbedArgs),
    /// Run the model/embedding comparison and write reports.
    Run(RunArgs),
    /// Render a machine-readable report as a comparison table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of patients.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Hourly feature count.
    #[arg(long, default_value_t = 104)]
    pub features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the three cohort files.
    #[arg(long)]
    pub out: PathBuf,
    /// Override one task's positive rate, e.g. --prevalence los_gt3=0.432
    /// (repeatable).
    #[arg(long = "prevalence", value_name = "TASK=RATE")]
    pub prevalences: Vec<String>,
    /// Task label both signal channels correlate with.
    #[arg(long, default_value = "in_hospital")]
    pub signal_task: String,
    /// Time-series drift strength in [0, 1]; 0 removes the channel.
    #[arg(long, default_value_t = 0.5)]
    pub ts_strength: f64,
    /// How many leading features carry the drift.
    #[arg(long, default_value_t = 4)]
    pub ts_features: usize,
    /// Marker-entity lift in [0, 1]; 0 makes markers uninformative.
    #[arg(long, default_value_t = 0.5)]
    pub entity_strength: f64,
    /// Marker rate independent of the label.
    #[arg(long, default_value_t = 0.05)]
    pub marker_base_rate: f64,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// One of: sgns, fasttext, pvdm.
    #[arg(long)]
    pub method: String,
    /// Entities file; per-patient token documents are built from it.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Hash buckets for subword n-grams (fasttext only).
    #[arg(long, default_value_t = 50_000)]
    pub buckets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output vector file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// One of: in_hospital, in_icu, los_gt3, los_gt7.
    #[arg(long)]
    pub task: String,
    /// Comma-separated: gru, averaged, doc2vec, entities_only, proposed.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Comma-separated: word2vec, fasttext, concat, doc2vec.
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub embeddings: Vec<String>,
    /// Directory with timeseries.csv, entities.csv, labels.csv.
    #[arg(long)]
    pub cohort_dir: PathBuf,
    #[arg(long)]
    pub word2vec_vectors: Option<PathBuf>,
    #[arg(long)]
    pub fasttext_vectors: Option<PathBuf>,
    #[arg(long)]
    pub doc2vec_vectors: Option<PathBuf>,
    /// Output directory for report.kv and report.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// key=value file supplying any unset tunable below.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Number of training seeds (0..n).
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience; 0 disables early stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub fc_baseline: Option<usize>,
    #[arg(long)]
    pub fc_proposed: Option<usize>,
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Three comma-separated convolution filter counts, e.g. 32,64,96.
    #[arg(long)]
    pub filters: Option<String>,
    /// F1 decision threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Machine-readable report file (report.kv).
    #[arg(long)]
    pub input: PathBuf,
    /// Write the rendered table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
