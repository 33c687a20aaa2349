use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "gazeconv",
    version,
    about = "Fully convolutional segmentation, reconstruction and generation of gaze data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its loss history.
    Train(TrainArgs),
    /// Label every sample of a gaze file.
    Segment(ApplyArgs),
    /// Repair a gaze file with a reconstruction model.
    Reconstruct(ApplyArgs),
    /// Synthesize a scanpath with a generative model.
    Generate(GenerateArgs),
    /// Run an evaluation protocol and write its reports.
    Eval(EvalArgs),
    /// Write a synthetic corpus with known ground truth.
    Toy(ToyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Segment,
    Reconstruct,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    /// Labeled fixations and saccades.
    Segment,
    /// Smooth sine paths.
    Reconstruct,
    /// Unlabeled fixations and saccades.
    Generate,
    /// Every sample of a subject carries that subject's class.
    Canary,
}

/// Options shared by commands that load a configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration; omitted values take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of gaze CSV files.
    #[arg(long, env = "GAZECONV_DATA")]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning rate after warmup.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub decay_every: Option<usize>,
    /// Learning rate at which training stops.
    #[arg(long)]
    pub stop_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub task: TaskArg,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Samples to generate; a positive multiple of 4.
    #[arg(long)]
    pub length: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500.0)]
    pub start_x: f64,
    #[arg(long, default_value_t = 400.0)]
    pub start_y: f64,
    #[arg(long, default_value_t = 0.0)]
    pub start_t: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub task: TaskArg,
    #[command(flatten)]
    pub run: RunArgs,
    /// Trained model (reconstruct and generate).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Corruption percentages, e.g. 5,10,15,20,25,30.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Scanpaths to generate.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    pub kind: ToyKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Samples per file.
    #[arg(long)]
    pub length: Option<usize>,
}
