use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "elm-misinfo",
    version,
    about = "Train and compare CNN-LSTM misinformation classifiers with persuasion-cue features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus, assign stratified folds, write folds.csv and corpus_summary.json.
    Ingest(IngestArgs),
    /// Write the unscaled ten-feature matrix as features.csv.
    Features(FeaturesArgs),
    /// Cross-validate the requested variants and write the comparison outputs.
    Run(RunArgs),
    /// Render roc.svg and improvement.svg from a finished run directory.
    Plot(PlotArgs),
    /// Check that every output in a directory matches its recorded config and inputs.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// CSV of true news items (needs a `text` column).
    #[arg(long)]
    pub true_csv: PathBuf,
    /// CSV of fake news items (needs a `text` column).
    #[arg(long)]
    pub fake_csv: PathBuf,
}

#[derive(Args, Clone)]
pub struct LexiconArgs {
    /// Tab-separated `word<TAB>score` file replacing the bundled sentiment lexicon.
    #[arg(long)]
    pub sentiment_lexicon: Option<PathBuf>,
    /// Tab-separated word list replacing the bundled urgency lexicon.
    #[arg(long)]
    pub urgency_lexicon: Option<PathBuf>,
}

#[derive(Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated subset of base, features_only, enhanced, combined.
    #[arg(long, value_delimiter = ',', default_value = "base,enhanced")]
    pub variants: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
    #[arg(long, default_value_t = 100)]
    pub max_seq_len: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    /// Worker threads for fold training (defaults to the available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write roc.svg and improvement.svg.
    #[arg(long)]
    pub plots: bool,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args)]
pub struct PlotArgs {
    /// Run directory holding roc_<variant>.csv and folds.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Output directory to check.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Features(a) => commands::features(&a),
        Command::Run(a) => commands::run(&a),
        Command::Plot(a) => commands::plot(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
