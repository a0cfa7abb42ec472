use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::DatasetSplit;
use crate::model::{argmax, LstmClassifier};
use crate::numerics::{cross_entropy, Real, SeededRng};
use crate::textprep::{prepare_text, EncodedSequence, TextprepError, Vocabulary};

use super::{accumulate_gradients, adam_update, clip_gradients, AdamState, Gradients, TrainError};

pub const DEFAULT_EPOCHS: usize = 12;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_CLIP_NORM: f64 = 5.0;
/// Any parameter magnitude above this counts as divergence.
pub const DEFAULT_MAX_PARAM_MAGNITUDE: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    /// Stop after this many epochs without validation-loss improvement.
    pub patience: Option<usize>,
    pub max_param_magnitude: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            clip_norm: DEFAULT_CLIP_NORM,
            seed: 0,
            shuffle_each_epoch: true,
            patience: None,
            max_param_magnitude: DEFAULT_MAX_PARAM_MAGNITUDE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!(
                "clip norm must be positive, got {}",
                self.clip_norm
            ));
        }
        if !(self.max_param_magnitude > 0.0) {
            return bad("max parameter magnitude must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// A labeled, encoded training or validation example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub seq: EncodedSequence,
    pub label: usize,
}

/// Mean loss and accuracy of `model` over `examples` (0 and 0 when empty).
pub fn loss_and_accuracy<T: Real>(
    model: &LstmClassifier<T>,
    examples: &[EncodedExample],
) -> Result<(f64, f64), TrainError> {
    if examples.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let probs = model.probabilities(&ex.seq)?;
        loss += cross_entropy(&probs, ex.label)?.to_f64();
        correct += usize::from(argmax(&probs) == ex.label);
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Encodes labeled texts, dropping those that tokenize to nothing.
///
/// Returns the encoded examples and the number dropped.
pub fn encode_examples(
    examples: &[crate::corpus::LabeledExample],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<EncodedExample>, usize), TrainError> {
    let mut out = Vec::with_capacity(examples.len());
    let mut skipped = 0;
    for ex in examples {
        match prepare_text(&ex.text, vocab, max_len) {
            Ok(seq) => out.push(EncodedExample {
                seq,
                label: ex.label,
            }),
            Err(TextprepError::EmptyTokens) => skipped += 1,
            Err(e) => return Err(TrainError::Model(e.into())),
        }
    }
    Ok((out, skipped))
}

fn batch_gradients<T: Real>(
    model: &LstmClassifier<T>,
    batch: &[&EncodedExample],
    grads: &mut Gradients<T>,
) -> Result<(), TrainError> {
    // summed in example order, then averaged
    for ex in batch {
        let pass = model.forward(&ex.seq)?;
        accumulate_gradients(model, &pass, &ex.seq, ex.label, grads)?;
    }
    grads.scale_in_place(T::one() / T::from_f64(batch.len() as f64));
    Ok(())
}

/// Mini-batch training with Adam and global-norm clipping.
///
/// Every epoch shuffles the training set with the seeded generator, applies
/// one update per batch, then records full-pass train and validation
/// metrics. A non-finite loss or parameter, or a parameter above
/// `max_param_magnitude`, aborts with [`TrainError::Diverged`].
pub fn train_encoded<T: Real>(
    mut model: LstmClassifier<T>,
    train: &[EncodedExample],
    validation: &[EncodedExample],
    config: &TrainConfig,
) -> Result<(LstmClassifier<T>, Vec<EpochRecord>), TrainError> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut rng = SeededRng::new(config.seed);
    let mut adam = AdamState::for_model(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history: Vec<EpochRecord> = Vec::with_capacity(config.epochs);
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        if config.shuffle_each_epoch {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &train[i]).collect();
            let mut grads = Gradients::zeros_like(&model);
            batch_gradients(&model, &batch, &mut grads)?;
            if !grads.is_finite() {
                return Err(diverged(epoch, &history, "non-finite gradient"));
            }
            let grads = clip_gradients(grads, config.clip_norm)?;
            match adam_update(&mut model, &grads, &mut adam, config.learning_rate) {
                Ok(()) => {}
                Err(TrainError::NonFiniteParameters) => {
                    return Err(diverged(epoch, &history, "non-finite parameters"))
                }
                Err(e) => return Err(e),
            }
            let peak = model.max_abs_param().to_f64();
            if peak > config.max_param_magnitude {
                return Err(diverged(
                    epoch,
                    &history,
                    &format!(
                        "parameter magnitude {peak:.3e} exceeds {:.3e}",
                        config.max_param_magnitude
                    ),
                ));
            }
        }
        let (train_loss, train_accuracy) = loss_and_accuracy(&model, train)?;
        let (val_loss, val_accuracy) = loss_and_accuracy(&model, validation)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(diverged(epoch, &history, "non-finite loss"));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        };
        info!(
            "epoch {epoch}/{}: train loss {train_loss:.4} acc {train_accuracy:.4} | val loss {val_loss:.4} acc {val_accuracy:.4}",
            config.epochs
        );
        history.push(record);

        if let Some(patience) = config.patience {
            if val_loss < best_val {
                best_val = val_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    info!("early stop after epoch {epoch}: no validation improvement in {patience} epochs");
                    break;
                }
            }
        }
    }
    Ok((model, history))
}

fn diverged(epoch: usize, history: &[EpochRecord], reason: &str) -> TrainError {
    warn!(
        "training diverged in epoch {epoch} ({reason}); last good epoch: {}",
        history
            .last()
            .map_or("none".to_string(), |r| r.epoch.to_string())
    );
    TrainError::Diverged {
        epoch,
        reason: reason.to_string(),
        history: history.to_vec(),
    }
}

/// Encodes a split with `vocab` and trains on it.
pub fn train<T: Real>(
    model: LstmClassifier<T>,
    split: &DatasetSplit,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<(LstmClassifier<T>, Vec<EpochRecord>), TrainError> {
    if vocab.len() != model.config.vocab_size {
        return Err(TrainError::InvalidConfig(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let max_len = model.config.max_len;
    let (train_set, skipped_train) = encode_examples(&split.train, vocab, max_len)?;
    let (val_set, skipped_val) = encode_examples(&split.validation, vocab, max_len)?;
    if skipped_train + skipped_val > 0 {
        warn!(
            "skipped {skipped_train} training and {skipped_val} validation examples with no tokens"
        );
    }
    train_encoded(model, &train_set, &val_set, config)
}
