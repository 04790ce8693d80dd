use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ebm_triage::embed::{ProviderConfig, ProviderMode, DEFAULT_DIMENSION};
use ebm_triage::forest::ForestParams;
use ebm_triage::linear::LinearHyperParams;
use ebm_triage::textpipe::{DEFAULT_MAX_DF_RATIO, DEFAULT_MIN_DF};
use ebm_triage::triage::Backend;
use ebm_triage::ClassWeights;

#[derive(Debug, Parser)]
#[command(
    name = "ebm-triage",
    version,
    about = "Classify biomedical abstracts into evidence classes and serve a curation queue"
)]
pub struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the forest and/or the linear head and write model files.
    Train(TrainArgs),
    /// Score models on a labelled corpus.
    Eval(EvalArgs),
    /// Write one prediction line per input document, in input order.
    Classify(ClassifyArgs),
    /// Run the triage HTTP service.
    Serve(ServeArgs),
    /// Measure tokenize + featurize + forest predict throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Forest,
    Linear,
    Both,
}

impl BackendChoice {
    pub fn backends(self) -> Vec<Backend> {
        match self {
            BackendChoice::Forest => vec![Backend::Forest],
            BackendChoice::Linear => vec![Backend::Linear],
            BackendChoice::Both => vec![Backend::Forest, Backend::Linear],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Forest,
    Linear,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Forest => Backend::Forest,
            BackendArg::Linear => Backend::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Stub,
    Remote,
}

impl From<ProviderKind> for ProviderMode {
    fn from(p: ProviderKind) -> Self {
        match p {
            ProviderKind::Stub => ProviderMode::Stub,
            ProviderKind::Remote => ProviderMode::Remote,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Inverse,
    Uniform,
}

impl From<WeightingArg> for ClassWeights {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Inverse => ClassWeights::InverseFrequency,
            WeightingArg::Uniform => ClassWeights::Uniform,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Embedding provider for the linear backend.
    #[arg(long, value_enum, default_value_t = ProviderKind::Stub)]
    pub provider: ProviderKind,
    /// Base URL of the remote embedding service.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DIMENSION)]
    pub dimension: usize,
    #[arg(long, default_value_t = 0)]
    pub stub_seed: u64,
    #[arg(long, default_value_t = 30_000)]
    pub embed_timeout_ms: u64,
    #[arg(long, default_value_t = 32)]
    pub max_batch: usize,
    /// Directory for cached embeddings.
    #[arg(long)]
    pub embed_cache: Option<PathBuf>,
}

impl ProviderArgs {
    pub fn config(&self) -> ProviderConfig {
        ProviderConfig {
            mode: self.provider.into(),
            endpoint: self.endpoint.clone(),
            dimension: self.dimension,
            stub_seed: self.stub_seed,
            timeout_ms: self.embed_timeout_ms,
            max_batch: self.max_batch,
            cache_dir: self.embed_cache.clone(),
            ..ProviderConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_samples_leaf: usize,
    /// Candidate features per split (default: ceil(sqrt(vocabulary size))).
    #[arg(long)]
    pub features_per_split: Option<usize>,
    #[arg(long, value_enum, default_value_t = WeightingArg::Inverse)]
    pub class_weights: WeightingArg,
    #[arg(long, default_value_t = DEFAULT_MIN_DF)]
    pub min_df: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_DF_RATIO)]
    pub max_df_ratio: f64,
}

impl ForestArgs {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
            seed,
            class_weights: self.class_weights.into(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LinearArgs {
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

impl LinearArgs {
    pub fn hyperparams(&self, seed: u64, weights: ClassWeights) -> LinearHyperParams {
        LinearHyperParams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2_lambda: self.l2,
            seed,
            class_weights: weights,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Labelled corpus (one JSON record per line).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output model directory.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendChoice::Both)]
    pub backend: BackendChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold out this stratified fraction (same split as `eval` with the same
    /// seed); 0 trains on everything.
    #[arg(long, default_value_t = 0.0)]
    pub test_ratio: f64,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub linear: LinearArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Labelled corpus.
    #[arg(long, required_unless_present = "published")]
    pub corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "published")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendChoice::Forest)]
    pub backend: BackendChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate only the held-out fraction `train` left out with the same
    /// seed; 0 evaluates the whole corpus.
    #[arg(long, default_value_t = 0.0)]
    pub test_ratio: f64,
    /// Write metrics-<backend>.json and confusion-<backend>.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the published reference scores and their improvement summary
    /// instead of evaluating a model.
    #[arg(long, conflicts_with_all = ["corpus", "model"])]
    pub published: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Corpus to classify; `-` reads stdin.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Forest)]
    pub backend: BackendArg,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Documents read and classified per batch.
    #[arg(long, default_value_t = 2048)]
    pub chunk_size: usize,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// TOML service configuration; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Feedback log directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Labelled corpus used alongside feedback when retraining.
    #[arg(long)]
    pub training_corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub min_new_labels: Option<usize>,
    /// Only retrain on POST /retrain.
    #[arg(long)]
    pub no_auto_retrain: bool,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub stub_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Corpus to time (needs --model); default is a synthetic corpus.
    #[arg(long, requires = "model", conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of synthetic abstracts to time.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Synthetic documents used to train the (untimed) forest.
    #[arg(long, default_value_t = 2000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Print a JSON object instead of text.
    #[arg(long)]
    pub json: bool,
}
