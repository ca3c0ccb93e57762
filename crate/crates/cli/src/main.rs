//! `hatedetect`: preprocessing, training, evaluation, prediction and
//! toxicity-score experiments from one binary.

mod commands;
mod manifest;
mod perspective;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hatedetect_core::encode::ChannelSet;
use hatedetect_core::ingest::ColumnMap;
use hatedetect_core::perspective::{Arm, VectorMode};
use hatedetect_core::train::{EncoderMode, Regime};
use hatedetect_core::classify::Activation;
use hatedetect_core::{Error, Language, Task};

/// Exit status for invalid flags, configuration or unsupported languages.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for unreadable or inconsistent data.
pub const EXIT_DATA: u8 = 3;
/// Exit status for scoring-service failures.
pub const EXIT_NETWORK: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "hatedetect", version, about = "Multilingual hate-speech detection")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose tweets into cleaned text and entity channels (JSON lines).
    Preprocess(PreprocessArgs),
    /// Train classifier heads under the mono- or multilingual regime.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled corpus.
    Evaluate(EvaluateArgs),
    /// Write label predictions and class probabilities.
    Predict(PredictArgs),
    /// Toxicity-score features and the deep-MLP experiments.
    #[command(subcommand)]
    Perspective(PerspectiveCommand),
}

/// `lang=path` pair.
#[derive(Debug, Clone)]
pub struct LangPath {
    pub language: Language,
    pub path: PathBuf,
}

fn parse_lang_path(s: &str) -> Result<LangPath, String> {
    let (lang, path) = s.split_once('=').ok_or_else(|| format!("expected LANG=PATH, got `{s}`"))?;
    Ok(LangPath {
        language: parse_lang(lang)?,
        path: PathBuf::from(path),
    })
}

fn parse_lang(s: &str) -> Result<Language, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Input TSV (tweet_id, text, task_1, task_2).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_lang)]
    pub lang: Language,
    /// Header mapping such as `id=ID,text=tweet`.
    #[arg(long, value_parser = parse_with::<ColumnMap>)]
    pub columns: Option<ColumnMap>,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Word-count file for hashtag segmentation.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_with::<Task>)]
    pub task: Task,
    /// Training corpora, one per language.
    #[arg(long = "data", value_parser = parse_lang_path, required = true)]
    pub data: Vec<LangPath>,
    #[arg(long, value_parser = parse_with::<Regime>)]
    pub regime: Option<Regime>,
    /// `hashing[:BUCKETS[:PROJECTION_DIM]]` or `precomputed:PATH`.
    #[arg(long, default_value = "hashing:1024")]
    pub encoder: String,
    #[arg(long, value_parser = parse_with::<EncoderMode>)]
    pub encoder_mode: Option<EncoderMode>,
    /// Comma-separated subset of text,hashtag,emoji.
    #[arg(long, value_parser = parse_with::<ChannelSet>)]
    pub channels: Option<ChannelSet>,
    /// Emoji vectors (word2vec text format).
    #[arg(long)]
    pub emoji: Option<PathBuf>,
    /// Segmentation word counts per language.
    #[arg(long = "lexicon", value_parser = parse_lang_path)]
    pub lexicons: Vec<LangPath>,
    #[arg(long, value_parser = parse_with::<Activation>, default_value = "tanh")]
    pub activation: Activation,
    /// Training configuration (TOML or JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, value_parser = parse_with::<ColumnMap>)]
    pub columns: Option<ColumnMap>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_parser = parse_with::<Task>)]
    pub task: Task,
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum PerspectiveCommand {
    /// Score tweets and write feature vectors.
    Extract(ExtractArgs),
    /// Train one deep MLP on extracted vectors.
    Train(PerspectiveTrainArgs),
    /// Cross-validated grid search over activations, optimizers and widths.
    Grid(GridArgs),
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Vector layout; defaults to the corpus language.
    #[arg(long, value_parser = parse_with::<VectorMode>)]
    pub mode: Option<VectorMode>,
    /// Query the public endpoint (key from PERSPECTIVE_API_KEY).
    #[arg(long, conflicts_with = "endpoint")]
    pub live: bool,
    /// Base URL of a compatible service. Without this or --live a local
    /// mock server is used.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Requests per second; 1 for remote services, unlimited for the mock.
    #[arg(long)]
    pub rate_limit: Option<f64>,
    /// Concurrent requests.
    #[arg(long, default_value_t = 1)]
    pub in_flight: usize,
    /// JSON-lines score cache, reused across runs.
    #[arg(long)]
    pub cache_path: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VectorInputs {
    /// Vector files from `perspective extract`; several are concatenated.
    #[arg(long = "vectors", required = true)]
    pub vectors: Vec<PathBuf>,
    #[arg(long, value_parser = parse_with::<Task>)]
    pub task: Task,
    /// Hidden layers; 12 for task1 and 9 for task2 by default.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
}

#[derive(Args, Debug)]
pub struct PerspectiveTrainArgs {
    #[command(flatten)]
    pub inputs: VectorInputs,
    #[arg(long, value_parser = parse_with::<Activation>, default_value = "identity")]
    pub activation: Activation,
    #[arg(long, value_parser = parse_with::<Arm>, default_value = "sgd-adaptive")]
    pub arm: Arm,
    #[arg(long, default_value_t = 100)]
    pub width: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub inputs: VectorInputs,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Activation>)]
    pub activations: Option<Vec<Activation>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Arm>)]
    pub arms: Option<Vec<Arm>>,
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Ranked configurations (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_network() => EXIT_NETWORK,
        Error::Config(_) | Error::UnsupportedLanguage(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Train(a) => commands::train(&a, cli.seed),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Perspective(PerspectiveCommand::Extract(a)) => perspective::extract(&a),
        Command::Perspective(PerspectiveCommand::Train(a)) => perspective::train(&a, cli.seed),
        Command::Perspective(PerspectiveCommand::Grid(a)) => perspective::grid(&a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
