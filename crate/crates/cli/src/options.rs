//! Command-line flags and the JSON config file, resolved into library
//! configurations. Flags win over the file; the file wins over defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use hmge::model::{AttentionMode, HmgeConfig};
use hmge::sbm::FeatureKind;
use hmge::train::TrainConfig;
use serde::Deserialize;

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hmge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(hmge::Error::Config(_)) => 1,
            CliError::Core(hmge::Error::Numeric(_) | hmge::Error::BackwardTwice) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<hmge::Error> for CliError {
    fn from(e: hmge::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "hmge",
    version,
    about = "Hierarchical multiplex graph embedding"
)]
pub struct Cli {
    /// JSON file whose keys mirror the long flags, e.g. {"embed-size": 32}
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for data-parallel kernels
    #[arg(long, global = true, env = "HMGE_THREADS")]
    pub threads: Option<usize>,
    /// Log progress (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a block-model multiplex graph
    Synth(SynthArgs),
    /// Train on a dataset and write the embeddings plus a model checkpoint
    Train(TrainArgs),
    /// Evaluate embeddings on a downstream task
    Eval(EvalArgs),
    /// Compare the full model with both ablations
    Ablate(AblateArgs),
    /// Classification scores over several embedding sizes
    Sweep(SweepArgs),
    /// Recompute embeddings and combination weights from a saved model
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionArg {
    Softmax,
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    Degree,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Link,
    Synthetic,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Node count [default: 1000]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Dimension count [default: 3]
    #[arg(long)]
    pub dims: Option<usize>,
    /// Class count [default: 2]
    #[arg(long)]
    pub classes: Option<usize>,
    /// Within-class edge probability [default: 0.05]
    #[arg(long)]
    pub p_in: Option<f64>,
    /// Cross-class edge probability [default: 0.01]
    #[arg(long)]
    pub p_out: Option<f64>,
    /// Node features [default: degree]
    #[arg(long, value_enum)]
    pub features: Option<FeatureArg>,
    /// Columns of gaussian features [default: 64]
    #[arg(long)]
    pub feature_width: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Embedding size M [default: 64]
    #[arg(long)]
    pub embed_size: Option<usize>,
    /// Hidden layers L; 0 selects linear aggregation [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// Dimension counts per level, starting with the dataset's, e.g. 8,3,1
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Attention normalization [default: softmax]
    #[arg(long, value_enum)]
    pub attention: Option<AttentionArg>,
    /// Convolutions per dimension when --layers is 0 [default: 3]
    #[arg(long)]
    pub linear_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Maximum epochs [default: 2000, 500 for the synthetic task]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without improvement before stopping [default: min(100, epochs)]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Decoupled weight decay [default: 1e-5]
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Random seed for initialization and corruption [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Task to run
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    /// Dataset directory (not used by the synthetic task)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Trained model for classification; trains from scratch when absent
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for report.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of edges held out per dimension [default: 0.1]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Labeled fraction for the classifier [default: 0.1]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Synthetic task: dimension counts [default: 3,11,21,41]
    #[arg(long, value_delimiter = ',')]
    pub dim_counts: Option<Vec<usize>>,
    /// Synthetic task: seeds [default: 0,1,2]
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Synthetic task: nodes per graph [default: 1000]
    #[arg(long)]
    pub nodes: Option<usize>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of edges held out per dimension [default: 0.1]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Labeled fraction for the classifier [default: 0.1]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Embedding sizes to try [default: 16,32,64,128]
    #[arg(long, value_delimiter = ',')]
    pub embed_sizes: Option<Vec<usize>>,
    /// Labeled fraction for the classifier [default: 0.1]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Saved model.bin
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset the model was trained on
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of `--config`. Every key is optional and spelled like its flag.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub nodes: Option<usize>,
    pub dims: Option<usize>,
    pub classes: Option<usize>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub features: Option<FeatureArg>,
    pub feature_width: Option<usize>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub embed_size: Option<usize>,
    pub layers: Option<usize>,
    pub schedule: Option<Vec<usize>>,
    pub attention: Option<AttentionArg>,
    pub linear_depth: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub task: Option<Task>,
    pub ratio: Option<f64>,
    pub train_fraction: Option<f64>,
    pub dim_counts: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
    pub embed_sizes: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// First present value among flag and file, else the default.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

/// A path that must come from the flag or the file.
pub fn required_path(
    flag: &Option<PathBuf>,
    file: &Option<PathBuf>,
    name: &str,
) -> CliResult<PathBuf> {
    flag.clone()
        .or_else(|| file.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

pub const DEFAULT_EMBED_SIZE: usize = 64;
pub const DEFAULT_LAYERS: usize = 2;

pub fn model_config(args: &ModelArgs, file: &FileConfig, num_dims: usize) -> CliResult<HmgeConfig> {
    let m = pick(&args.embed_size, &file.embed_size, DEFAULT_EMBED_SIZE);
    let layers = pick(&args.layers, &file.layers, DEFAULT_LAYERS);
    let mut config = if layers == 0 {
        let depth = pick(&args.linear_depth, &file.linear_depth, DEFAULT_LAYERS + 1);
        HmgeConfig::linear(num_dims, m, depth)
    } else {
        HmgeConfig::new(num_dims, m, layers)
    };
    if let Some(schedule) = args.schedule.clone().or_else(|| file.schedule.clone()) {
        if layers == 0 {
            return Err(CliError::Usage(
                "--schedule needs --layers of at least 1".into(),
            ));
        }
        config = config.with_schedule(schedule);
    }
    config.attention = match pick(&args.attention, &file.attention, AttentionArg::Softmax) {
        AttentionArg::Softmax => AttentionMode::Softmax,
        AttentionArg::Signed => AttentionMode::Signed,
    };
    config.validate(num_dims)?;
    Ok(config)
}

pub fn train_config(
    args: &TrainingArgs,
    file: &FileConfig,
    default_epochs: usize,
) -> CliResult<TrainConfig> {
    let defaults = TrainConfig::default();
    let epochs = pick(&args.epochs, &file.epochs, default_epochs);
    let config = TrainConfig {
        epochs,
        patience: pick(
            &args.patience,
            &file.patience,
            defaults.patience.min(epochs),
        ),
        learning_rate: pick(&args.lr, &file.lr, defaults.learning_rate),
        weight_decay: pick(
            &args.weight_decay,
            &file.weight_decay,
            defaults.weight_decay,
        ),
        seed: pick(&args.seed, &file.seed, defaults.seed),
    };
    config.validate()?;
    Ok(config)
}

pub fn feature_kind(kind: FeatureArg, width: usize) -> FeatureKind {
    match kind {
        FeatureArg::Degree => FeatureKind::Degree,
        FeatureArg::Gaussian => FeatureKind::Gaussian { width },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file: FileConfig =
            serde_json::from_str(r#"{"embed-size": 32, "layers": 1, "lr": 0.01}"#).unwrap();
        let args = ModelArgs {
            embed_size: Some(16),
            layers: None,
            schedule: None,
            attention: None,
            linear_depth: None,
        };
        let c = model_config(&args, &file, 4).unwrap();
        assert_eq!(c.embed_size, 16);
        assert_eq!(c.num_layers, 1);
        assert_eq!(c.attention, AttentionMode::Softmax);
        let t = TrainingArgs {
            epochs: Some(10),
            patience: None,
            lr: None,
            weight_decay: None,
            seed: None,
        };
        let tc = train_config(&t, &file, 2000).unwrap();
        assert_eq!((tc.epochs, tc.patience, tc.learning_rate), (10, 10, 0.01));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"embed_size": 3}"#).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::Core(hmge::Error::Config("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::Core(hmge::Error::Numeric("x".into())).exit_code(),
            3
        );
        let io = hmge::Error::Io {
            path: "p".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(CliError::Core(io).exit_code(), 2);
    }
}
