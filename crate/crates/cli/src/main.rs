//! `evalfilter`: build self-labeled datasets, train the pair scorer, filter
//! candidate pairs, run two-stage LLM extraction and evaluate predictions.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evalfilter::filtering::CandidateMode;
use evalfilter::llm::PipelineMode;
use evalfilter::model::EncoderMode;
use evalfilter::Error;

use crate::config::ClientKind;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_CLIENT: u8 = 4;
pub const EXIT_INTERNAL: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "evalfilter", version, about)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for data generation, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or generate a dataset and write self-labeled token-pair matrices.
    BuildDataset(BuildDatasetArgs),
    /// Train the pair scorer and write a checkpoint.
    Train(TrainArgs),
    /// Score candidate pairs or external triples with a trained model.
    Filter(FilterArgs),
    /// Run LLM extraction over a dataset.
    Extract(ExtractArgs),
    /// Score predictions against gold triples.
    Evaluate(EvaluateArgs),
    /// Print dataset statistics by sentence length.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Dataset JSONL with `{"id", "text", "triples": [{"s", "p", "o"}]}` lines.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate this many synthetic sentences instead of reading `--input`.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Fewest gold triples per synthetic sentence.
    #[arg(long, default_value_t = 1)]
    pub min_triples: usize,
    /// Most gold triples per synthetic sentence.
    #[arg(long, default_value_t = 6)]
    pub max_triples: usize,
    /// Prefix of synthetic sentence ids.
    #[arg(long, default_value = "syn")]
    pub id_prefix: String,
    /// Relation list, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// TAB-separated map from structured relation paths to names.
    #[arg(long)]
    pub normalization: Option<PathBuf>,
    /// Directory for sentences.jsonl, labels.jsonl, relations.txt and report.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Relation list, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Held-out dataset for pair-classification scores after training.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report (losses per epoch) to write as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for one checkpoint per epoch.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Passes over the training set.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// AdamW learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Sentences per update.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Train the toy encoder jointly or only the decoder over exported features.
    #[arg(long, value_enum)]
    pub encoder_mode: Option<EncoderModeArg>,
    /// Exported encoder features (JSONL) for the pretrained-adapter mode.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum EncoderModeArg {
    PretrainedAdapter,
    ToyFromScratch,
}

impl From<EncoderModeArg> for EncoderMode {
    fn from(m: EncoderModeArg) -> Self {
        match m {
            EncoderModeArg::PretrainedAdapter => EncoderMode::PretrainedAdapter,
            EncoderModeArg::ToyFromScratch => EncoderMode::ToyFromScratch,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum CandidateArg {
    OracleEntities,
    ExternalNer,
}

impl From<CandidateArg> for CandidateMode {
    fn from(m: CandidateArg) -> Self {
        match m {
            CandidateArg::OracleEntities => CandidateMode::OracleEntities,
            CandidateArg::ExternalNer => CandidateMode::ExternalNer,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Full,
    NoStage1,
    NoStage2,
    NoFiltering,
}

impl From<ModeArg> for PipelineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => PipelineMode::Full,
            ModeArg::NoStage1 => PipelineMode::NoStage1,
            ModeArg::NoStage2 => PipelineMode::NoStage2,
            ModeArg::NoFiltering => PipelineMode::NoFiltering,
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Relation list, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Where candidate entity pairs come from.
    #[arg(long, value_enum)]
    pub candidates: Option<CandidateArg>,
    /// Entity mentions JSONL for `--candidates external-ner`.
    #[arg(long)]
    pub mentions: Option<PathBuf>,
    /// Another extractor's predictions; when given, its triples are filtered
    /// instead of generated candidate pairs.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Keep pairs scoring strictly above this value.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Output file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Relation list, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Full pipeline or one of the ablations.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Scripted mock or HTTP chat-completions endpoint.
    #[arg(long, value_enum)]
    pub client: Option<ClientKind>,
    /// Canned responses for the mock client.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// LLM model name sent to the endpoint and recorded in the manifest.
    #[arg(long)]
    pub llm_model: Option<String>,
    /// Trained checkpoint, needed by the modes that filter candidates.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Where candidate entity pairs come from.
    #[arg(long, value_enum)]
    pub candidates: Option<CandidateArg>,
    /// Entity mentions JSONL for `--candidates external-ner`.
    #[arg(long)]
    pub mentions: Option<PathBuf>,
    /// Another extractor's predictions, for `--mode no-stage2`.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Keep pairs scoring strictly above this value.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Concurrent LLM calls.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Predictions JSONL to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Raw LLM responses JSONL; not written unless given.
    #[arg(long)]
    pub responses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold dataset JSONL.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions JSONL with `{"id", "triples"}` lines.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset name, used to pick the default dense-sentence threshold.
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    /// Minimum gold triples for the dense stratum.
    #[arg(long)]
    pub strata_t: Option<usize>,
    /// Minimum content tokens for the long-sentence stratum.
    #[arg(long)]
    pub length: Option<usize>,
    /// Curve thresholds as `a..b` (inclusive) or a comma list.
    #[arg(long)]
    pub curve: Option<String>,
    /// CSV file for the curve; printed to stdout when absent.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare strings after Unicode NFC normalization.
    #[arg(long)]
    pub nfc: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Relation list, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// TAB-separated map from structured relation paths to names.
    #[arg(long)]
    pub normalization: Option<PathBuf>,
    /// Minimum sentence lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,30,60,90")]
    pub cuts: Vec<usize>,
    /// Dataset name shown in the table.
    #[arg(long, default_value = "dataset")]
    pub name: String,
}

/// Exit status for an error: configuration, data, client or internal.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => EXIT_CONFIG,
        Some(Error::Client(_)) => EXIT_CLIENT,
        Some(Error::State(_) | Error::Divergence { .. } | Error::Generation(_)) => EXIT_INTERNAL,
        Some(_) => EXIT_DATA,
        None => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
