//! JSON model archives and training-history CSV.
//!
//! An archive looks like
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "precision": 64,
//!   "model_config": { "vocab_size": 9, "embed_dim": 64, ... },
//!   "vocab_fingerprint": "<sha-256 hex of the vocabulary JSON>",
//!   "tensors": { "W_C": { "shape": [128, 192], "values": [ ... ] }, ... }
//! }
//! ```
//!
//! Values are written as shortest round-trip decimals, so 64-bit
//! parameters reload bit for bit. Tensor keys are sorted.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LstmClassifier, ModelConfig, ModelError, ParamId};
use crate::numerics::{Matrix, Real};
use crate::textprep::Vocabulary;
use crate::training::EpochRecord;

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;
pub const HISTORY_HEADER: [&str; 5] = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"];

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed archive: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("unsupported archive format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("archive is missing tensor `{0}`")]
    MissingTensor(String),
    #[error("archive contains unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("vocabulary fingerprint {found} does not match the archive's {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("archive stores {found}-bit parameters but {requested}-bit were requested")]
    PrecisionMismatch { found: u32, requested: u32 },
    #[error("history is empty")]
    EmptyHistory,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistenceError + '_ {
    move |source| PersistenceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: (usize, usize),
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    /// Bit width of the parameters the archive was written from.
    pub precision: u32,
    pub model_config: ModelConfig,
    pub vocab_fingerprint: String,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl ModelArchive {
    pub fn from_model<T: Real>(model: &LstmClassifier<T>, vocab: &Vocabulary) -> Self {
        let tensors = ParamId::ALL
            .iter()
            .map(|&id| {
                let m = model.tensor(id);
                let record = TensorRecord {
                    shape: m.shape(),
                    values: m.values().iter().map(|&v| Real::to_f64(v)).collect(),
                };
                (id.name().to_string(), record)
            })
            .collect();
        Self {
            format_version: ARCHIVE_FORMAT_VERSION,
            precision: T::BITS,
            model_config: model.config.clone(),
            vocab_fingerprint: vocab.fingerprint(),
            tensors,
        }
    }

    /// Rebuilds the model, validating version, tensor names and shapes.
    ///
    /// Loading a 64-bit archive as 32-bit is refused because it would
    /// silently lose precision; the reverse is exact and allowed.
    pub fn to_model<T: Real>(&self) -> Result<LstmClassifier<T>, PersistenceError> {
        if self.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(PersistenceError::UnsupportedVersion {
                found: self.format_version,
                expected: ARCHIVE_FORMAT_VERSION,
            });
        }
        if self.precision > T::BITS {
            return Err(PersistenceError::PrecisionMismatch {
                found: self.precision,
                requested: T::BITS,
            });
        }
        for name in self.tensors.keys() {
            if name.parse::<ParamId>().is_err() {
                return Err(PersistenceError::UnknownTensor(name.clone()));
            }
        }
        let mut tensors = BTreeMap::new();
        for id in ParamId::ALL {
            let record = self
                .tensors
                .get(id.name())
                .ok_or_else(|| PersistenceError::MissingTensor(id.name().to_string()))?;
            let expected = id.shape(&self.model_config);
            if record.shape != expected {
                return Err(PersistenceError::ShapeMismatch {
                    name: id.name().to_string(),
                    found: record.shape,
                    expected,
                });
            }
            let values = record.values.iter().map(|&v| T::from_f64(v)).collect();
            let matrix = Matrix::from_vec(record.shape.0, record.shape.1, values)
                .map_err(ModelError::from)?;
            tensors.insert(id, matrix);
        }
        Ok(LstmClassifier::from_tensors(
            self.model_config.clone(),
            |id| tensors.remove(&id),
        )?)
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<(), PersistenceError> {
        let found = vocab.fingerprint();
        if found != self.vocab_fingerprint {
            return Err(PersistenceError::FingerprintMismatch {
                expected: self.vocab_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serialization cannot fail")
    }

    pub fn read(path: &Path) -> Result<Self, PersistenceError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| PersistenceError::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub fn save_model<T: Real>(
    model: &LstmClassifier<T>,
    vocab: &Vocabulary,
    path: &Path,
) -> Result<(), PersistenceError> {
    let mut json = ModelArchive::from_model(model, vocab).to_json();
    json.push('\n');
    fs::write(path, json).map_err(io_err(path))
}

/// Loads an archive and checks it was trained with `vocab`.
pub fn load_model<T: Real>(
    path: &Path,
    vocab: &Vocabulary,
) -> Result<LstmClassifier<T>, PersistenceError> {
    let archive = ModelArchive::read(path)?;
    let model = archive.to_model()?;
    archive.check_vocab(vocab)?;
    Ok(model)
}

pub fn write_history_csv(history: &[EpochRecord], path: &Path) -> Result<(), PersistenceError> {
    if history.is_empty() {
        return Err(PersistenceError::EmptyHistory);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HISTORY_HEADER)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            r.val_loss.to_string(),
            r.val_accuracy.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}
