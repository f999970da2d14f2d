mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Stable exit codes: 0 success, 2 format errors, 3 validation errors,
/// 4 runtime errors.
pub const EXIT_FORMAT: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn format(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_FORMAT, message: message.into() }
    }
    pub fn validation(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }
    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "seasoncast",
    about = "Seasonal temperature forecasting from weather-station records:\n\
             feature engineering, MLP cross-validation, and symbolic regression",
    version
)]
struct Cli {
    /// Seed for every stochastic step; fixed seed + fixed inputs give
    /// byte-identical outputs
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config file; flags override it, it overrides defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the seasonal feature dataset from station records
    Features(FeaturesArgs),
    /// Size-search, cross-validate, and train the MLP
    TrainMlp(TrainMlpArgs),
    /// Evolve a Pareto archive of candidate formulas
    Evolve(EvolveArgs),
    /// Variable-sensitivity table for a formula over a dataset
    Sensitivity(SensitivityArgs),
    /// Predict with a saved model or a formula
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Daily CSV input(s); may carry several stations each
    #[arg(long)]
    pub daily: Vec<PathBuf>,
    /// Monthly CSV input(s) for stations without daily data
    #[arg(long)]
    pub monthly: Vec<PathBuf>,
    /// Station harmonization offsets CSV
    #[arg(long)]
    pub offsets: Option<PathBuf>,
    /// Minimum fraction of days a period must cover (no interpolation)
    #[arg(long)]
    pub min_coverage: Option<f64>,
    /// Rainfall at or above this many millimeters makes a day rainy
    #[arg(long)]
    pub rainy_threshold_mm: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainMlpArgs {
    /// Feature CSV with targets
    #[arg(long)]
    pub features: PathBuf,
    /// Cross-validation folds
    #[arg(long)]
    pub k: Option<usize>,
    /// Hidden-layer size; omits the grow/prune search
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub init_range: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Feature CSV with targets
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Stop early at this training MSE
    #[arg(long)]
    pub target_mse: Option<f64>,
    /// Add the Gaussian to the function set
    #[arg(long)]
    pub enable_gaussian: bool,
    /// Also export expected/predicted pairs for the archive member with
    /// this complexity
    #[arg(long)]
    pub select: Option<u32>,
    #[arg(long)]
    pub split_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    /// Formula file (first non-comment line is used)
    #[arg(long)]
    pub formula: PathBuf,
    /// Feature CSV
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Saved MLP model file
    #[arg(long, conflicts_with = "formula")]
    pub model: Option<PathBuf>,
    /// Formula file (first non-comment line is used)
    #[arg(long)]
    pub formula: Option<PathBuf>,
    /// Feature CSV, with or without the target column
    #[arg(long)]
    pub features: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file_config = match &cli.config {
        Some(path) => match config::FileConfig::load(path) {
            Ok(c) => c,
            Err(message) => {
                eprintln!("error: {message}");
                return ExitCode::from(EXIT_FORMAT);
            }
        },
        None => config::FileConfig::default(),
    };
    let seed = cli.seed.or(file_config.seed).unwrap_or(42);

    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }

    let result = match &cli.command {
        Command::Features(args) => commands::features(args, &file_config, seed, &cli.out),
        Command::TrainMlp(args) => commands::train_mlp(args, &file_config, seed, &cli.out),
        Command::Evolve(args) => commands::evolve(args, &file_config, seed, &cli.out),
        Command::Sensitivity(args) => commands::sensitivity(args, &cli.out),
        Command::Predict(args) => commands::predict(args, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
