use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    derive_labels, generate_synthetic_corpus, load_corpus, save_corpus, split, CorpusFormat,
    LabelScheme, LabeledExample, DEFAULT_SPLIT_RATIO,
};
use crate::evaluation::{comparison_table, evaluate};
use crate::model::{
    init_model, predict, DecisionPolicy, LstmClassifier, ModelConfig, ModelError, ParamId,
};
use crate::model::{DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM};
use crate::numerics::{Real, SeededRng};
use crate::persistence::{save_model, write_history_csv, ModelArchive};
use crate::textprep::{
    build_vocabulary, prepare_text, text_tokens, EncodedSequence, TextprepError, Vocabulary,
    DEFAULT_MAX_LEN, DEFAULT_MAX_VOCAB, DEFAULT_MIN_FREQ,
};
use crate::training::{
    grad_check, train_encoded, EncodedExample, EpochRecord, GradCheckOptions, GradCheckReport,
    TrainConfig, TrainError, GRADCHECK_TOLERANCE,
};

use super::{
    ensure_dir, write_json, CliError, CommonArgs, ConfigFile, EvaluateArgs, FormatArg,
    GradcheckArgs, Precision, PredictArgs, PrepareArgs, RunManifest, SynthArgs, TrainArgs,
};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_SYNTH_SIZE: usize = 500;

fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

fn required_out(common: &CommonArgs) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out <dir> is required".into()))?;
    ensure_dir(&dir)?;
    Ok(dir)
}

fn precision_of(common: &CommonArgs, config: &ConfigFile) -> Precision {
    pick(common.precision, config.precision, Precision::F64)
}

/// One line of `train.jsonl` / `val.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub source_id: String,
    pub label: usize,
    pub text: String,
    pub seq: EncodedSequence,
}

/// Summary of a prepared dataset, written as `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub scheme: LabelScheme,
    pub num_classes: usize,
    pub max_len: usize,
    pub ratio: f64,
    pub seed: u64,
    pub vocab_size: usize,
    pub vocab_fingerprint: String,
    pub train_examples: usize,
    pub validation_examples: usize,
    /// Posts that produced no tokens and were left out of both splits.
    pub skipped_ids: Vec<String>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}

fn read_records(path: &Path) -> Result<Vec<PreparedRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::input(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CliError::input(path, format!("line {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

fn write_records(path: &Path, records: &[PreparedRecord]) -> Result<(), CliError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::input(path, e))
}

#[derive(Serialize)]
struct SynthSettings {
    seed: u64,
    n: usize,
    format: FormatArg,
}

/// Writes `corpus.csv` (or `.jsonl`) into the output directory.
pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf, CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    let settings = SynthSettings {
        seed: pick(args.common.seed, config.seed, DEFAULT_SEED),
        n: pick(args.n, config.n, DEFAULT_SYNTH_SIZE),
        format: pick(args.format, config.format, FormatArg::Csv),
    };
    let out = required_out(&args.common)?;
    let format = match settings.format {
        FormatArg::Csv => CorpusFormat::Csv,
        FormatArg::Jsonl => CorpusFormat::Jsonl,
    };
    let name = format!("corpus.{}", format.extension());
    let path = out.join(&name);
    let posts = generate_synthetic_corpus(settings.seed, settings.n);
    save_corpus(&posts, &path, format)?;
    info!("wrote {} posts to {}", posts.len(), path.display());
    RunManifest::new("synth", Some(settings.seed), &settings).write(&out, &[&name])?;
    Ok(path)
}

#[derive(Serialize)]
struct PrepareSettings {
    seed: u64,
    scheme: LabelScheme,
    ratio: f64,
    max_vocab: usize,
    min_freq: usize,
    max_len: usize,
}

/// Splits the corpus, fits the vocabulary on the training side and encodes
/// both sides.
pub fn cmd_prepare(args: &PrepareArgs) -> Result<DatasetInfo, CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    let settings = PrepareSettings {
        seed: pick(args.common.seed, config.seed, DEFAULT_SEED),
        scheme: pick(
            args.scheme.map(Into::into),
            config.scheme,
            LabelScheme::Binary,
        ),
        ratio: pick(args.ratio, config.ratio, DEFAULT_SPLIT_RATIO),
        max_vocab: pick(args.max_vocab, config.max_vocab, DEFAULT_MAX_VOCAB),
        min_freq: pick(args.min_freq, config.min_freq, DEFAULT_MIN_FREQ),
        max_len: pick(args.max_len, config.max_len, DEFAULT_MAX_LEN),
    };
    if settings.max_len == 0 {
        return Err(CliError::Usage("--max-len must be at least 1".into()));
    }
    let out = required_out(&args.common)?;

    let posts = load_corpus(&args.corpus, CorpusFormat::from_path(&args.corpus))?;
    let examples = derive_labels(&posts, settings.scheme);
    let parts = split(&examples, settings.ratio, settings.seed)?;
    let vocab = build_vocabulary(
        parts.train.iter().map(|ex| text_tokens(&ex.text)),
        settings.max_vocab,
        settings.min_freq,
    )?;

    let mut skipped_ids = Vec::new();
    let mut encode_all = |examples: &[LabeledExample]| -> Result<Vec<PreparedRecord>, CliError> {
        let mut records = Vec::with_capacity(examples.len());
        for ex in examples {
            match prepare_text(&ex.text, &vocab, settings.max_len) {
                Ok(seq) => records.push(PreparedRecord {
                    source_id: ex.source_id.clone(),
                    label: ex.label,
                    text: ex.text.clone(),
                    seq,
                }),
                Err(TextprepError::EmptyTokens) => skipped_ids.push(ex.source_id.clone()),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(records)
    };
    let train = encode_all(&parts.train)?;
    let val = encode_all(&parts.validation)?;
    if !skipped_ids.is_empty() {
        warn!(
            "{} posts produced no tokens and were skipped",
            skipped_ids.len()
        );
    }

    let info = DatasetInfo {
        scheme: settings.scheme,
        num_classes: settings.scheme.num_classes(),
        max_len: settings.max_len,
        ratio: settings.ratio,
        seed: settings.seed,
        vocab_size: vocab.len(),
        vocab_fingerprint: vocab.fingerprint(),
        train_examples: train.len(),
        validation_examples: val.len(),
        skipped_ids,
    };
    vocab.save(&out.join("vocab.json"))?;
    write_records(&out.join("train.jsonl"), &train)?;
    write_records(&out.join("val.jsonl"), &val)?;
    write_json(&out.join("dataset.json"), &info)?;
    info!(
        "prepared {} training and {} validation examples, vocabulary of {}",
        info.train_examples, info.validation_examples, info.vocab_size
    );
    RunManifest::new("prepare", Some(settings.seed), &settings)
        .input("corpus", &args.corpus)
        .write(
            &out,
            &["vocab.json", "train.jsonl", "val.jsonl", "dataset.json"],
        )?;
    Ok(info)
}

#[derive(Serialize)]
struct TrainSettings {
    precision: Precision,
    model: ModelConfig,
    training: TrainConfig,
}

fn to_encoded(records: Vec<PreparedRecord>) -> Vec<EncodedExample> {
    records
        .into_iter()
        .map(|r| EncodedExample {
            seq: r.seq,
            label: r.label,
        })
        .collect()
}

fn train_with<T: Real>(
    settings: &TrainSettings,
    train: &[EncodedExample],
    val: &[EncodedExample],
    vocab: &Vocabulary,
    out: &Path,
) -> Result<Vec<EpochRecord>, CliError> {
    let model: LstmClassifier<T> = init_model(&settings.model)?;
    match train_encoded(model, train, val, &settings.training) {
        Ok((model, history)) => {
            save_model(&model, vocab, &out.join("model.json"))?;
            write_history_csv(&history, &out.join("history.csv"))?;
            Ok(history)
        }
        Err(TrainError::Diverged {
            epoch,
            reason,
            history,
        }) => {
            match history.last() {
                Some(last) => {
                    warn!("last good epoch: {}", last.epoch);
                    write_history_csv(&history, &out.join("history.csv"))?;
                }
                None => warn!("no epoch completed before divergence"),
            }
            Err(TrainError::Diverged {
                epoch,
                reason,
                history,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Trains on a prepared directory; writes `model.json`, `vocab.json`,
/// `history.csv` and the manifest.
pub fn cmd_train(args: &TrainArgs) -> Result<Vec<EpochRecord>, CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    let seed = pick(args.common.seed, config.seed, DEFAULT_SEED);
    let info: DatasetInfo = read_json(&args.data.join("dataset.json"))?;
    let vocab_path = args.data.join("vocab.json");
    let vocab = Vocabulary::load(&vocab_path)?;
    if vocab.fingerprint() != info.vocab_fingerprint {
        return Err(CliError::input(
            &vocab_path,
            "vocabulary does not match dataset.json",
        ));
    }
    let defaults = TrainConfig::default();
    let settings = TrainSettings {
        precision: precision_of(&args.common, &config),
        model: ModelConfig {
            vocab_size: vocab.len(),
            embed_dim: pick(args.embed_dim, config.embed_dim, DEFAULT_EMBED_DIM),
            hidden_dim: pick(args.hidden_dim, config.hidden_dim, DEFAULT_HIDDEN_DIM),
            num_classes: info.num_classes,
            max_len: info.max_len,
            seed,
        },
        training: TrainConfig {
            epochs: pick(args.epochs, config.epochs, defaults.epochs),
            batch_size: pick(args.batch_size, config.batch_size, defaults.batch_size),
            learning_rate: pick(args.lr, config.learning_rate, defaults.learning_rate),
            clip_norm: pick(args.clip_norm, config.clip_norm, defaults.clip_norm),
            seed,
            patience: args.patience.or(config.patience),
            ..defaults
        },
    };
    settings
        .model
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    settings
        .training
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = required_out(&args.common)?;

    let train = to_encoded(read_records(&args.data.join("train.jsonl"))?);
    let val = to_encoded(read_records(&args.data.join("val.jsonl"))?);
    vocab.save(&out.join("vocab.json"))?;
    let manifest = RunManifest::new("train", Some(seed), &settings).input("data", &args.data);
    let result = match settings.precision {
        Precision::F32 => train_with::<f32>(&settings, &train, &val, &vocab, &out),
        Precision::F64 => train_with::<f64>(&settings, &train, &val, &vocab, &out),
    };
    let outputs: &[&str] = if result.is_ok() {
        &["model.json", "vocab.json", "history.csv"]
    } else {
        &["vocab.json", "history.csv"]
    };
    manifest.write(&out, outputs)?;
    result
}

fn vocab_path_for(model: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    explicit
        .cloned()
        .unwrap_or_else(|| model.parent().unwrap_or(Path::new(".")).join("vocab.json"))
}

fn load_archive(model: &Path, vocab: &Path) -> Result<(ModelArchive, Vocabulary), CliError> {
    let archive = ModelArchive::read(model)?;
    let vocab = Vocabulary::load(vocab)?;
    archive.check_vocab(&vocab)?;
    Ok((archive, vocab))
}

fn archive_precision(archive: &ModelArchive, requested: Option<Precision>) -> Precision {
    requested.unwrap_or(if archive.precision == 32 {
        Precision::F32
    } else {
        Precision::F64
    })
}

#[derive(Serialize)]
struct EvaluateSettings {
    precision: Precision,
}

/// Writes `metrics.json` and `report.txt`; returns the comparison table.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String, CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    let vocab_path = vocab_path_for(&args.model, args.vocab.as_ref());
    let (archive, vocab) = load_archive(&args.model, &vocab_path)?;
    let settings = EvaluateSettings {
        precision: archive_precision(&archive, args.common.precision.or(config.precision)),
    };
    let out = required_out(&args.common)?;
    let examples: Vec<LabeledExample> = read_records(&args.data)?
        .into_iter()
        .map(|r| LabeledExample {
            text: r.text,
            label: r.label,
            source_id: r.source_id,
        })
        .collect();
    let evaluation = match settings.precision {
        Precision::F32 => evaluate(&archive.to_model::<f32>()?, &vocab, &examples)?,
        Precision::F64 => evaluate(&archive.to_model::<f64>()?, &vocab, &examples)?,
    };
    if evaluation.skipped > 0 {
        warn!(
            "{} examples produced no tokens and were not scored",
            evaluation.skipped
        );
    }
    write_json(&out.join("metrics.json"), &evaluation)?;
    let mut table = comparison_table(&evaluation.metrics, "This run");
    table.push_str(&format!(
        "\nevaluated {} examples, skipped {} with no tokens\n",
        evaluation.evaluated, evaluation.skipped
    ));
    let report = out.join("report.txt");
    fs::write(&report, &table).map_err(|e| CliError::input(&report, e))?;
    RunManifest::new("evaluate", None, &settings)
        .input("model", &args.model)
        .input("vocab", &vocab_path)
        .input("data", &args.data)
        .write(&out, &["metrics.json", "report.txt"])?;
    Ok(table)
}

fn predict_lines<T: Real>(
    model: &LstmClassifier<T>,
    vocab: &Vocabulary,
    texts: &[String],
    policy: DecisionPolicy,
    w: &mut dyn Write,
) -> Result<usize, CliError> {
    let mut failed = 0;
    for text in texts {
        let line = match predict(model, vocab, text, policy) {
            Ok(p) => {
                let probs: Vec<String> = p
                    .probs
                    .iter()
                    .map(|&v| format!("{:.6}", Real::to_f64(v)))
                    .collect();
                format!("{}\t{}", p.class, probs.join(","))
            }
            Err(ModelError::Text(TextprepError::EmptyTokens)) => {
                failed += 1;
                "error\tno tokens".to_string()
            }
            Err(e) => return Err(e.into()),
        };
        writeln!(w, "{line}").map_err(|e| CliError::input(Path::new("<stdout>"), e))?;
    }
    Ok(failed)
}

#[derive(Serialize)]
struct PredictSettings {
    precision: Precision,
    threshold: Option<f64>,
    lenient: bool,
    texts: usize,
}

/// Writes one `<class>\t<p0>,<p1>,...` line per text, in input order.
///
/// Texts with no tokens get an `error` line; unless `--lenient` is set the
/// command then fails after printing every line.
pub fn cmd_predict(args: &PredictArgs, w: &mut dyn Write) -> Result<(), CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    let texts: Vec<String> = match &args.file {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::input(path, e))?
            .lines()
            .map(str::to_string)
            .collect(),
        None => args.text.clone(),
    };
    if texts.is_empty() {
        return Err(CliError::Usage("give --text or --file".into()));
    }
    let vocab_path = vocab_path_for(&args.model, args.vocab.as_ref());
    let (archive, vocab) = load_archive(&args.model, &vocab_path)?;
    let policy = match args.threshold {
        None => DecisionPolicy::Argmax,
        Some(t) if archive.model_config.num_classes == 2 && (0.0..=1.0).contains(&t) => {
            DecisionPolicy::PositiveThreshold(t)
        }
        Some(t) => {
            return Err(CliError::Usage(format!(
                "--threshold {t} needs a binary model and a value in [0, 1]"
            )))
        }
    };
    let settings = PredictSettings {
        precision: archive_precision(&archive, args.common.precision.or(config.precision)),
        threshold: args.threshold,
        lenient: args.lenient,
        texts: texts.len(),
    };
    let failed = match settings.precision {
        Precision::F32 => predict_lines(&archive.to_model::<f32>()?, &vocab, &texts, policy, w)?,
        Precision::F64 => predict_lines(&archive.to_model::<f64>()?, &vocab, &texts, policy, w)?,
    };
    if let Some(out) = &args.common.out {
        ensure_dir(out)?;
        let mut manifest = RunManifest::new("predict", None, &settings)
            .input("model", &args.model)
            .input("vocab", &vocab_path);
        if let Some(file) = &args.file {
            manifest = manifest.input("texts", file);
        }
        manifest.write(out, &[])?;
    }
    if failed > 0 && !args.lenient {
        return Err(CliError::PredictFailed {
            failed,
            total: texts.len(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckSettings {
    seed: u64,
    model: ModelConfig,
    epsilon: f64,
    corrupt: Option<String>,
}

/// Gradient check on a random model and a random full-length sequence.
pub fn cmd_gradcheck(args: &GradcheckArgs, w: &mut dyn Write) -> Result<GradCheckReport, CliError> {
    let config = ConfigFile::load(args.common.config.as_deref())?;
    if precision_of(&args.common, &config) != Precision::F64 {
        return Err(CliError::Usage(
            "gradient checking requires --precision 64: 32-bit rounding swamps finite differences at eps 1e-5"
                .into(),
        ));
    }
    let seed = pick(args.common.seed, config.seed, DEFAULT_SEED);
    let corrupt = match &args.corrupt {
        Some(name) => Some(
            name.parse::<ParamId>()
                .map_err(|_| CliError::Usage(format!("unknown tensor `{name}`")))?,
        ),
        None => None,
    };
    let settings = GradcheckSettings {
        seed,
        model: ModelConfig {
            vocab_size: pick(args.vocab_size, config.vocab_size, 10),
            embed_dim: pick(args.embed_dim, config.embed_dim, 2),
            hidden_dim: pick(args.hidden_dim, config.hidden_dim, 3),
            num_classes: pick(args.classes, config.classes, 2),
            max_len: pick(args.max_len, config.max_len, 4),
            seed,
        },
        epsilon: pick(
            args.epsilon,
            config.epsilon,
            GradCheckOptions::default().epsilon,
        ),
        corrupt: args.corrupt.clone(),
    };
    settings
        .model
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if settings.model.vocab_size < 2 {
        return Err(CliError::Usage("--vocab-size must be at least 2".into()));
    }

    let model: LstmClassifier<f64> = init_model(&settings.model)?;
    let mut rng = SeededRng::new(seed).fork();
    let len = settings.model.max_len;
    let ids: Vec<u32> = (0..len)
        .map(|_| 1 + rng.next_below(settings.model.vocab_size as u64 - 1) as u32)
        .collect();
    let label = rng.next_below(settings.model.num_classes as u64) as usize;
    let seq = EncodedSequence {
        ids,
        valid_len: len,
    };
    let options = GradCheckOptions {
        epsilon: settings.epsilon,
        seed,
        corrupt,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&model, &seq, label, &options)?;

    let io = |e| CliError::input(Path::new("<stdout>"), e);
    for (id, err) in &report.per_tensor {
        writeln!(w, "{:<10} {err:.3e}", id.name()).map_err(io)?;
    }
    writeln!(
        w,
        "max relative error {:.3e} over {} coordinates (tolerance {GRADCHECK_TOLERANCE:.0e})",
        report.max_relative_error, report.coordinates_checked
    )
    .map_err(io)?;
    if let Some(out) = &args.common.out {
        ensure_dir(out)?;
        RunManifest::new("gradcheck", Some(seed), &settings).write(out, &[])?;
    }
    if !report.passed() {
        return Err(CliError::GradCheckFailed {
            max_relative_error: report.max_relative_error,
            tolerance: GRADCHECK_TOLERANCE,
        });
    }
    Ok(report)
}
