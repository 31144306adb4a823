mod commands;
mod dataset;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::DatasetFile;

#[derive(Debug, Parser)]
#[command(name = "swr", version, about = "Gaussian sliding windows regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a dataset and write model, report and fitted values.
    Fit(FitArgs),
    /// Predict the target from the input series with a saved model.
    Predict(PredictArgs),
    /// Generate a synthetic dataset from a random or given ground truth.
    Simulate(SimulateArgs),
    /// Run a simulation study over a grid of setups and noise levels.
    Study(StudyArgs),
    /// Score predictions against observations.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Delimited text file with one row per time step.
    data: PathBuf,
    /// Integer time column; the row number is used when omitted.
    #[arg(long)]
    time_col: Option<String>,
    /// Input (driver) column.
    #[arg(long, default_value = "x")]
    x_col: String,
    /// Target column.
    #[arg(long, default_value = "y")]
    y_col: String,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The file has no header row; columns are addressed by position.
    #[arg(long)]
    no_header: bool,
}

impl DataArgs {
    fn dataset(&self) -> Result<DatasetFile, error::CliError> {
        if !self.delimiter.is_ascii() {
            return Err(error::CliError::Usage("delimiter must be a single ASCII character".into()));
        }
        Ok(DatasetFile {
            path: self.data.clone(),
            time: self.time_col.clone(),
            input: self.x_col.clone(),
            target: self.y_col.clone(),
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CriterionArg {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Nll,
    Rmse,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Maximum number of windows.
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    /// Information criterion used to pick the number of windows.
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    criterion: CriterionArg,
    /// Training loss.
    #[arg(long, value_enum, default_value_t = LossArg::Nll)]
    loss: LossArg,
    /// Estimate an intercept.
    #[arg(long)]
    intercept: bool,
    /// Correct autocorrelated errors with a Cochrane-Orcutt refit.
    #[arg(long)]
    autocorr: bool,
    /// Largest AR order tried by the autocorrelation correction.
    #[arg(long, default_value_t = 3)]
    max_ar_order: usize,
    /// Durbin-Watson p-value below which errors count as autocorrelated.
    #[arg(long, default_value_t = 0.01)]
    dw_alpha: f64,
    /// Seed for the Durbin-Watson permutation test.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Fraction of rows used for training; the rest is scored as test data.
    #[arg(long, default_value_t = 0.75)]
    split: f64,
    /// Also write standard errors from the observed information.
    #[arg(long)]
    uncertainty: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON written by `fit` or `simulate`.
    #[arg(long)]
    model: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProcessArg {
    Iid,
    Ar1,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Number of randomly drawn ground-truth windows.
    #[arg(long, default_value_t = 1)]
    windows: usize,
    /// Ground-truth model JSON; overrides --windows.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Noise SD relative to the SD of the noiseless target.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ProcessArg::Iid)]
    process: ProcessArg,
    /// AR(1) coefficient for --process ar1.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 3000)]
    length: usize,
    /// Probability of a non-zero input value per step.
    #[arg(long, default_value_t = 0.3)]
    spike_rate: f64,
    /// Mean size of a non-zero input value.
    #[arg(long, default_value_t = 1.0)]
    spike_scale: f64,
    /// Read the input series from this CSV instead of generating it.
    #[arg(long)]
    input_file: Option<PathBuf>,
    /// Column of --input-file holding the input series.
    #[arg(long, default_value = "x")]
    input_col: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Study grid JSON; individual flags are ignored when given.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Ground-truth window counts.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    k_values: Vec<usize>,
    /// Ground-truth setups per window count.
    #[arg(long, default_value_t = 5)]
    setups_per_k: usize,
    /// Noise levels.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.25, 0.5, 0.75, 0.95])]
    alphas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ProcessArg::Iid)]
    process: ProcessArg,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 3000)]
    length: usize,
    #[arg(long, default_value_t = 0.75)]
    split: f64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON used to predict; otherwise --predicted-col is scored.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Column holding predictions; empty fields are skipped.
    #[arg(long, default_value = "y_hat")]
    predicted_col: String,
    /// Also score the head and tail of a split at this fraction.
    #[arg(long)]
    split: Option<f64>,
    /// Output JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Predict(args) => commands::predict(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Study(args) => commands::study(args),
        Command::Evaluate(args) => commands::evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
