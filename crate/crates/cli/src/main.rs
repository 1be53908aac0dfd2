//! Command line front end: synth, extract, train, tune, rank, classify,
//! report. Every failure is printed to stderr as one JSON object with a
//! module-qualified code so callers can branch without scraping text.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod ops;

use ops::CliError;

#[derive(Parser)]
#[command(
    name = "platsight",
    version,
    about = "Classify the user platforms behind streaming video flows from handshake metadata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic capture from platform profiles.
    Synth(SynthArgs),
    /// Turn a capture into per-flow handshake records and attribute vectors.
    Extract(ExtractArgs),
    /// Train one forest objective for a provider and protocol.
    Train(TrainArgs),
    /// Grid-search forest hyperparameters and keep the best model.
    Tune(TuneArgs),
    /// Rank attributes by information gain.
    Rank(RankArgs),
    /// Classify a capture against a model bank.
    Classify(ClassifyArgs),
    /// Aggregate classified sessions into usage reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Profile roster JSON; the built-in roster when omitted.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Samples to generate per profile.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_pcap: PathBuf,
    #[arg(long)]
    out_labels: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    pcap: PathBuf,
    /// Output path for the flow records (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Value dictionary store. In train mode it is extended (created if
    /// missing) and written back; in infer mode it is read-only and
    /// required.
    #[arg(long)]
    dicts: Option<PathBuf>,
    /// "train" grows the value dictionaries, "infer" maps unseen values
    /// to the sentinel instead.
    #[arg(long, default_value = "train")]
    mode: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Flow records from `extract` (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth labels CSV matching the capture.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    provider: String,
    #[arg(long)]
    protocol: String,
    /// platform, device or agent.
    #[arg(long)]
    objective: String,
    /// Training config JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dictionary store the data was encoded with.
    #[arg(long)]
    dicts: PathBuf,
    /// Output path for the model (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    provider: String,
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    objective: String,
    #[arg(long)]
    dicts: PathBuf,
    /// Candidate tree depths.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 12, 16])]
    depths: Vec<usize>,
    /// Candidate attribute counts per split.
    #[arg(long = "n-attrs", value_delimiter = ',', default_values_t = vec![2usize, 4, 8, 13])]
    n_attrs: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path for the accuracy surface (CSV).
    #[arg(long)]
    out_surface: PathBuf,
    /// Output path for the best model (JSON).
    #[arg(long)]
    out_model: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    provider: String,
    #[arg(long)]
    protocol: String,
    /// Label grouping to rank against: platform, device or agent.
    #[arg(long, default_value = "platform")]
    group: String,
    /// Output path for the importance table (CSV).
    #[arg(long)]
    out_importance: PathBuf,
    /// Optional output path for the per-field distribution report (CSV).
    #[arg(long)]
    out_distribution: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    pcap: PathBuf,
    /// Bank manifest JSON listing the models to apply.
    #[arg(long)]
    bank: PathBuf,
    /// Dictionary store the bank's models were trained with.
    #[arg(long)]
    dicts: PathBuf,
    /// Output path for predictions (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Predictions from `classify` (JSONL).
    #[arg(long)]
    predictions: PathBuf,
    /// Directory receiving the report CSVs and summary JSON.
    #[arg(long)]
    out_dir: PathBuf,
    /// Minimum session confidence to keep.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// device, agent, provider, provider-device or provider-agent.
    #[arg(long, default_value = "device")]
    group_by: String,
    /// Hours added to UTC when binning usage by local hour of day.
    #[arg(long, default_value_t = 0)]
    utc_offset: i32,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => ops::cmd_synth(&args),
        Command::Extract(args) => ops::cmd_extract(&args),
        Command::Train(args) => ops::cmd_train(&args),
        Command::Tune(args) => ops::cmd_tune(&args),
        Command::Rank(args) => ops::cmd_rank(&args),
        Command::Classify(args) => ops::cmd_classify(&args),
        Command::Report(args) => ops::cmd_report(&args),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "code": err.code(), "message": err.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
