//! The `threatlstm` command line.
//!
//! Every subcommand resolves its settings as flag, then `--config` JSON
//! value, then built-in default, and writes a `manifest.json` recording the
//! resolved values next to its outputs. Exit codes: 0 success, 1 failed
//! gradient check, 2 input or usage error, 3 runtime failure or divergence.

mod commands;

pub use commands::{
    cmd_evaluate, cmd_gradcheck, cmd_predict, cmd_prepare, cmd_synth, cmd_train, DatasetInfo,
    PreparedRecord,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, LabelScheme};
use crate::evaluation::EvalError;
use crate::model::ModelError;
use crate::persistence::PersistenceError;
use crate::textprep::TextprepError;
use crate::training::TrainError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_GRADCHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextprepError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("gradient check failed: max relative error {max_relative_error:.3e} exceeds {tolerance:.0e}")]
    GradCheckFailed {
        max_relative_error: f64,
        tolerance: f64,
    },
    #[error("{failed} of {total} texts could not be classified")]
    PredictFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::GradCheckFailed { .. } => EXIT_GRADCHECK_FAILED,
            CliError::Usage(_)
            | CliError::Input { .. }
            | CliError::Corpus(_)
            | CliError::Text(_)
            | CliError::Persistence(_)
            | CliError::Eval(_)
            | CliError::PredictFailed { .. } => EXIT_INPUT,
            CliError::Model(_) | CliError::Train(_) => EXIT_RUNTIME,
        }
    }

    pub(crate) fn input(path: &Path, message: impl ToString) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "threatlstm",
    version,
    about = "LSTM threat classifier for underground forum posts"
)]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled forum corpus.
    Synth(SynthArgs),
    /// Split a corpus, build the vocabulary and encode both splits.
    Prepare(PrepareArgs),
    /// Train a classifier on a prepared dataset.
    Train(TrainArgs),
    /// Score a trained model and compare it with published baselines.
    Evaluate(EvaluateArgs),
    /// Classify texts with a trained model.
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Precision {
    #[value(name = "32")]
    #[serde(rename = "32")]
    F32,
    #[value(name = "64")]
    #[serde(rename = "64")]
    F64,
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file of settings; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Floating-point width of model parameters.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of posts.
    #[arg(long)]
    pub n: Option<usize>,
    /// Output file format.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Binary,
    Multiclass,
}

impl From<SchemeArg> for LabelScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Binary => LabelScheme::Binary,
            SchemeArg::Multiclass => LabelScheme::Multiclass,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus file (.csv or .jsonl).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Label scheme [default: binary].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Fraction of each class assigned to training.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Vocabulary size cap, including the reserved tokens [default: 20000].
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Minimum training-split count for a token to enter the vocabulary [default: 2].
    #[arg(long)]
    pub min_freq: Option<usize>,
    /// Token sequences are truncated to this length [default: 250].
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// Passes over the training split [default: 12].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Examples per optimizer step [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Global gradient-norm clipping threshold [default: 5.0].
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Embedding width [default: 64].
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// LSTM hidden-state width [default: 128].
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Stop after this many epochs without validation-loss improvement.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model archive written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary file; defaults to `vocab.json` beside the archive.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Prepared examples (`train.jsonl` or `val.jsonl`).
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model archive written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary file; defaults to `vocab.json` beside the archive.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Text to classify; may be repeated.
    #[arg(long, conflicts_with = "file")]
    pub text: Vec<String>,
    /// File with one text per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Binary models: predict class 1 when its probability reaches this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report unclassifiable texts inline and still exit 0.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Vocabulary size of the probe model [default: 10].
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Embedding width [default: 2].
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Hidden-state width [default: 3].
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Sequence length [default: 4].
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Number of classes [default: 2].
    #[arg(long)]
    pub classes: Option<usize>,
    /// Central-difference step [default: 1e-5].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Debug: double the analytic gradient of this tensor (e.g. `W_C`).
    #[arg(long)]
    pub corrupt: Option<String>,
}

/// Settings accepted in a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub precision: Option<Precision>,
    pub n: Option<usize>,
    pub format: Option<FormatArg>,
    pub scheme: Option<LabelScheme>,
    pub ratio: Option<f64>,
    pub max_vocab: Option<usize>,
    pub min_freq: Option<usize>,
    pub max_len: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub clip_norm: Option<f64>,
    pub embed_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub patience: Option<usize>,
    pub vocab_size: Option<usize>,
    pub classes: Option<usize>,
    pub epsilon: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(path, format!("invalid config: {e}")))
    }
}

/// Record of one command invocation with every setting materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub settings: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, settings: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            inputs: BTreeMap::new(),
            settings: serde_json::to_value(settings).expect("settings serialize to JSON"),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs
            .insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn write(mut self, dir: &Path, outputs: &[&str]) -> Result<(), CliError> {
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        write_json(&dir.join("manifest.json"), &self)
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::input(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(dir, e))
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Prepare(a) => cmd_prepare(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Evaluate(a) => {
            let table = cmd_evaluate(&a)?;
            print!("{table}");
            Ok(())
        }
        Command::Predict(a) => {
            let mut stdout = std::io::stdout().lock();
            cmd_predict(&a, &mut stdout)
        }
        Command::Gradcheck(a) => {
            let mut stdout = std::io::stdout().lock();
            cmd_gradcheck(&a, &mut stdout).map(|_| ())
        }
    }
}
