use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use topicgraph::kernels::KernelKind;
use topicgraph::model_io::InferMode;

#[derive(Debug, Parser)]
#[command(name = "topicgraph", version, about = "Partition-parallel LDA training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; prints one JSON metrics record per iteration.
    Train(TrainArgs),
    /// Infer topic proportions for documents, one per input line.
    Infer(InferArgs),
    /// Compare partitioners by balance and replication factor.
    PartitionStats(PartitionArgs),
    /// Merge near-duplicate topics of a checkpoint.
    Dedup(DedupArgs),
    /// Time kernels on the same corpus and initialization.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SparseInitArg {
    None,
    Word,
    Doc,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Number of topics K.
    #[arg(long)]
    pub topics: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Concentration α' of the asymmetric document prior.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_as: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// libsvm corpus (optionally .gz).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value = "zen")]
    pub kernel: KernelKind,
    /// random, edge1d, edge1d-doc, edge2d or dbh+.
    #[arg(long, default_value = "dbh+")]
    pub partitioner: String,
    #[arg(long, default_value_t = 1)]
    pub parts: u32,
    #[arg(long, default_value_t = 0)]
    pub dbh_threshold: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: u32,
    #[arg(long, default_value_t = 100)]
    pub iters: u64,
    #[arg(long)]
    pub target_perplexity: Option<f64>,
    #[arg(long, value_enum, default_value_t = SparseInitArg::None)]
    pub sparse_init: SparseInitArg,
    #[arg(long, default_value_t = 0.1)]
    pub sparse_deg: f64,
    /// Enable token exclusion from this iteration (30 if given bare).
    #[arg(long, num_args = 0..=1, default_missing_value = "30")]
    pub exclude_start: Option<u64>,
    /// Ship only count changes at merge time.
    #[arg(long)]
    pub delta_agg: bool,
    #[arg(long, default_value_t = 0.0)]
    pub beta_boost: f64,
    #[arg(long, default_value_t = 8)]
    pub mh_steps: u32,
    /// Disable remedy redraws in the zen kernels.
    #[arg(long)]
    pub no_remedy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 0 disables periodic checkpoints.
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: u64,
    /// Evaluate likelihood every N iterations (and on the last); 0 disables.
    #[arg(long, default_value_t = 1)]
    pub eval_every: u64,
    #[arg(long, default_value = "topicgraph-out")]
    pub output_dir: PathBuf,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Report zero step timings so output is byte-reproducible.
    #[arg(long)]
    pub omit_timings: bool,
    /// Fail if any count changes while partitions are sampling.
    #[arg(long)]
    pub verify_snapshot: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One document per line; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub iters: u32,
    #[arg(long, default_value = "gibbs")]
    pub mode: InferMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    /// libsvm corpus; a synthetic power-law graph is used when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Edge count of the synthetic graph.
    #[arg(long, default_value_t = 100_000)]
    pub power_law_edges: usize,
    #[arg(long, default_value_t = 1.1)]
    pub power_law_exponent: f64,
    #[arg(long, value_delimiter = ',', default_value = "random,edge1d,edge1d-doc,edge2d,dbh+")]
    pub partitioners: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub parts: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    pub dbh_threshold: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// L1 distance in [0, 2] below which topics merge.
    #[arg(long)]
    pub threshold: f64,
    /// Write the merged model here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// libsvm corpus; a synthetic LDA corpus is used when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub synthetic_docs: usize,
    #[arg(long, default_value_t = 5000)]
    pub synthetic_vocab: usize,
    #[arg(long, default_value_t = 100.0)]
    pub synthetic_doc_len: f64,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_as: f64,
    #[arg(long, value_delimiter = ',', default_value = "zen,zen-hybrid,sparse,light,standard")]
    pub kernels: Vec<KernelKind>,
    #[arg(long, default_value_t = 5)]
    pub iters: u64,
    #[arg(long, default_value_t = 1)]
    pub parts: u32,
    #[arg(long, default_value_t = 1)]
    pub workers: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
