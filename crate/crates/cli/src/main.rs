mod commands;
mod error;
mod formats;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "mirkit", version, about = "Music classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// STFT magnitude, melspectrogram or CQT of a WAV file.
    Spectrogram(SpectrogramArgs),
    /// Writes seeded augmented views of a WAV file.
    Augment(AugmentArgs),
    /// Binary or multilabel metrics from truth and score CSVs.
    Evaluate(EvaluateArgs),
    /// Collapses chunk-level scores (`<track>#<k>` ids) to track level.
    Aggregate(AggregateArgs),
    /// Split audits and stratified split generation.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Trains the linear demo model on feature matrices.
    TrainDemo(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecKind {
    Stft,
    Mel,
    Cqt,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "stft")]
    pub kind: SpecKind,
    #[arg(long)]
    pub n_fft: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub n_mels: Option<usize>,
    #[arg(long)]
    pub bins_per_octave: Option<usize>,
    /// CQT bin count; defaults to seven octaves.
    #[arg(long)]
    pub n_bins: Option<usize>,
    #[arg(long)]
    pub fmin: Option<f64>,
    /// Convert to decibels relative to the maximum (80 dB range).
    #[arg(long)]
    pub db: bool,
    /// Output matrix; `.csv` selects CSV, anything else F32M.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional 8-bit PGM rendering (implies dB scaling for the image).
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Overrides the pipeline's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the pipeline's view count.
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; output bytes do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Decision threshold for binary mode (score >= threshold is positive).
    #[arg(long)]
    pub threshold: Option<f32>,
    #[arg(long)]
    pub multilabel: bool,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateMethod {
    Mean,
    Max,
    Majority,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    pub method: AggregateMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KeyArg {
    Artist,
    Group,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Leakage and label-distribution audit of existing splits.
    CheckSplit(CheckSplitArgs),
    /// Stratified train/valid/test split of a manifest.
    MakeSplit(MakeSplitArgs),
}

#[derive(Debug, Args)]
pub struct CheckSplitArgs {
    /// Split files as `name=path` (or a bare path named by its file stem).
    #[arg(long, num_args = 1.., required = true)]
    pub splits: Vec<String>,
    /// TSV sidecar (`path, label, artist, group`) supplying grouping keys.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Key checked for leakage; requires the sidecar.
    #[arg(long, value_enum)]
    pub key: Option<KeyArg>,
    /// Label vocabulary, one per line; GTZAN genres by default.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MakeSplitArgs {
    /// Split txt or TSV sidecar (by `.tsv` extension).
    #[arg(long)]
    pub manifest: PathBuf,
    /// `train,valid,test` fractions.
    #[arg(long, default_value = "0.7,0.2,0.1")]
    pub fractions: String,
    #[arg(long, value_enum)]
    pub group_key: Option<KeyArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    Supervised,
    NoisyStudent,
    LinearEval,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled features, `N x d` matrix file.
    #[arg(long)]
    pub features: PathBuf,
    /// One integer class index per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Unlabeled features for noisy-student mode.
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    #[arg(long)]
    pub test_features: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "supervised")]
    pub mode: TrainMode,
    /// Training configuration JSON; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_classes: Option<usize>,
    /// Checkpoint path (`C x (d + 1)` matrix, bias last); metrics go to
    /// `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli, invocation: Vec<String>) -> CliResult<()> {
    match cli.command {
        Command::Spectrogram(a) => commands::spectrogram::run(&a),
        Command::Augment(a) => commands::augment::run(&a),
        Command::Evaluate(a) => commands::evaluate::run(&a, invocation),
        Command::Aggregate(a) => commands::aggregate::run(&a),
        Command::Dataset(DatasetCommand::CheckSplit(a)) => commands::dataset::check_split(&a, invocation),
        Command::Dataset(DatasetCommand::MakeSplit(a)) => commands::dataset::make_split(&a, invocation),
        Command::TrainDemo(a) => commands::train::run(&a, invocation),
    }
}

fn main() -> ExitCode {
    let invocation: Vec<String> = std::iter::once("mirkit".to_string())
        .chain(std::env::args().skip(1))
        .collect();
    let cli = Cli::parse();
    match run(cli, invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
