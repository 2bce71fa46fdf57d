//! Reproducible experiments on top of `mlpvo`: scene generation, MLP
//! training, classification evaluation and the visual-odometry comparison.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

mod commands;
mod table;

pub use commands::{cmd_eval, cmd_gen, cmd_report, cmd_train, cmd_vo};
pub use table::{parse_csv, render_table};

#[derive(Debug, Parser)]
#[command(name = "mlpvo", version, about = "Dynamic feature classification for visual odometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset and one scene with ground truth.
    Gen(GenArgs),
    /// Train the classifier on a dataset.
    Train(TrainArgs),
    /// Compare the classifier against threshold baselines.
    Eval(EvalArgs),
    /// Run the pose pipeline on a generated scene.
    Vo(VoArgs),
    /// Render a CSV report as an aligned table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator settings (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainingFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated epochs at which the learning rate decays.
    #[arg(long, value_delimiter = ',')]
    pub milestones: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Training settings (`key = value`); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Must match the seed used for training so the test split is unseen.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the threshold baselines.
    #[arg(long)]
    pub no_baselines: bool,
}

#[derive(Debug, Args)]
pub struct VoArgs {
    /// Output directory of `gen`.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Pipeline settings (`key = value`); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub huber: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub csv: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mlpvo::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: mlpvo::Error },
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub(crate) fn file(path: &Path, source: impl Into<mlpvo::Error>) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }

    /// 2 for configuration errors, 3 for data and I/O errors, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Core(e) | CliError::File { source: e, .. } => e,
            CliError::Config(_) => return 2,
        };
        match core {
            mlpvo::Error::Config(_) => 2,
            mlpvo::Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Vo(a) => cmd_vo(&a),
        Command::Report(a) => cmd_report(&a),
    }
}
