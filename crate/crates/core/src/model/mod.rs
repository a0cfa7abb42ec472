//! Single-layer LSTM sequence classifier.
//!
//! Token ids are embedded, fed through [`lstm_step`] for the valid prefix of
//! the sequence only, and the hidden state at the last valid position goes
//! through a dense softmax head.

mod cell;

pub use cell::{lstm_step, LstmParams, LstmState, StepCache};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{matmul, rng_uniform, softmax, Matrix, NumericsError, Real, SeededRng};
use crate::textprep::{
    prepare_text, EncodedSequence, TextprepError, Vocabulary, DEFAULT_MAX_LEN, PAD_ID,
};

pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 128;
/// Initial forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Text(#[from] TextprepError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("sequence has valid length {valid_len}, expected 1..={max_len}")]
    BadValidLength { valid_len: usize, max_len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default dimensions for a vocabulary and class count.
    pub fn new(vocab_size: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            num_classes,
            max_len: DEFAULT_MAX_LEN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_len", self.max_len),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        if self.num_classes < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// `vocab_size x embed_dim` lookup table; the PAD row stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub table: Matrix<T>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn zero_pad_row(&mut self) {
        self.table
            .row_mut(PAD_ID as usize)
            .iter_mut()
            .for_each(|v| *v = T::zero());
    }

    pub fn lookup(&self, id: u32) -> Result<Matrix<T>, ModelError> {
        if id as usize >= self.table.rows() {
            return Err(ModelError::TokenOutOfRange {
                id,
                vocab_size: self.table.rows(),
            });
        }
        Ok(Matrix::column(self.table.row(id as usize))?)
    }
}

/// Dense output layer: `W_y` is `num_classes x hidden_dim`, `b_y` is `num_classes x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T> {
    pub w_y: Matrix<T>,
    pub b_y: Matrix<T>,
}

/// Names of the trainable tensors; also the archive keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    Embedding,
    Wi,
    Wf,
    Wo,
    Wc,
    Bi,
    Bf,
    Bo,
    Bc,
    Wy,
    By,
}

impl ParamId {
    pub const ALL: [ParamId; 11] = [
        ParamId::Embedding,
        ParamId::Wi,
        ParamId::Wf,
        ParamId::Wo,
        ParamId::Wc,
        ParamId::Bi,
        ParamId::Bf,
        ParamId::Bo,
        ParamId::Bc,
        ParamId::Wy,
        ParamId::By,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Embedding => "embedding",
            ParamId::Wi => "W_i",
            ParamId::Wf => "W_f",
            ParamId::Wo => "W_o",
            ParamId::Wc => "W_C",
            ParamId::Bi => "b_i",
            ParamId::Bf => "b_f",
            ParamId::Bo => "b_o",
            ParamId::Bc => "b_C",
            ParamId::Wy => "W_y",
            ParamId::By => "b_y",
        }
    }

    /// Expected `(rows, cols)` under `config`.
    pub fn shape(self, config: &ModelConfig) -> (usize, usize) {
        let (h, e) = (config.hidden_dim, config.embed_dim);
        match self {
            ParamId::Embedding => (config.vocab_size, e),
            ParamId::Wi | ParamId::Wf | ParamId::Wo | ParamId::Wc => (h, h + e),
            ParamId::Bi | ParamId::Bf | ParamId::Bo | ParamId::Bc => (h, 1),
            ParamId::Wy => (config.num_classes, h),
            ParamId::By => (config.num_classes, 1),
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown tensor `{s}`"))
    }
}

/// Embedding, recurrent cell and head, plus the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier<T> {
    pub config: ModelConfig,
    pub embedding: EmbeddingTable<T>,
    pub lstm: LstmParams<T>,
    pub head: ClassifierHead<T>,
}

fn glorot<T: Real>(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix<T> {
    let bound = glorot_bound(rows, cols);
    rng_uniform(rng, -bound, bound, rows, cols).expect("glorot bound is a valid range")
}

/// `sqrt(6 / (fan_in + fan_out))` for a `rows x cols` matrix.
pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Glorot-uniform weights, zero biases except the forget gate at
/// [`FORGET_BIAS_INIT`], PAD embedding row zeroed.
pub fn init_model<T: Real>(config: &ModelConfig) -> Result<LstmClassifier<T>, ModelError> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let (h, e) = (config.hidden_dim, config.embed_dim);
    let mut embedding = EmbeddingTable {
        table: glorot(&mut rng, config.vocab_size, e),
    };
    embedding.zero_pad_row();
    let lstm = LstmParams {
        w_i: glorot(&mut rng, h, h + e),
        w_f: glorot(&mut rng, h, h + e),
        w_o: glorot(&mut rng, h, h + e),
        w_c: glorot(&mut rng, h, h + e),
        b_i: Matrix::zeros(h, 1),
        b_f: Matrix::filled(h, 1, T::from_f64(FORGET_BIAS_INIT)),
        b_o: Matrix::zeros(h, 1),
        b_c: Matrix::zeros(h, 1),
    };
    let head = ClassifierHead {
        w_y: glorot(&mut rng, config.num_classes, h),
        b_y: Matrix::zeros(config.num_classes, 1),
    };
    Ok(LstmClassifier {
        config: config.clone(),
        embedding,
        lstm,
        head,
    })
}

/// Output of a forward pass over one sequence.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    /// One cache per valid timestep.
    pub caches: Vec<StepCache<T>>,
}

impl<T: Real> ForwardPass<T> {
    /// Hidden state read out by the head.
    pub fn last_hidden(&self) -> &Matrix<T> {
        &self
            .caches
            .last()
            .expect("forward runs at least one step")
            .h
    }
}

impl<T: Real> LstmClassifier<T> {
    pub fn tensor(&self, id: ParamId) -> &Matrix<T> {
        match id {
            ParamId::Embedding => &self.embedding.table,
            ParamId::Wi => &self.lstm.w_i,
            ParamId::Wf => &self.lstm.w_f,
            ParamId::Wo => &self.lstm.w_o,
            ParamId::Wc => &self.lstm.w_c,
            ParamId::Bi => &self.lstm.b_i,
            ParamId::Bf => &self.lstm.b_f,
            ParamId::Bo => &self.lstm.b_o,
            ParamId::Bc => &self.lstm.b_c,
            ParamId::Wy => &self.head.w_y,
            ParamId::By => &self.head.b_y,
        }
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        match id {
            ParamId::Embedding => &mut self.embedding.table,
            ParamId::Wi => &mut self.lstm.w_i,
            ParamId::Wf => &mut self.lstm.w_f,
            ParamId::Wo => &mut self.lstm.w_o,
            ParamId::Wc => &mut self.lstm.w_c,
            ParamId::Bi => &mut self.lstm.b_i,
            ParamId::Bf => &mut self.lstm.b_f,
            ParamId::Bo => &mut self.lstm.b_o,
            ParamId::Bc => &mut self.lstm.b_c,
            ParamId::Wy => &mut self.head.w_y,
            ParamId::By => &mut self.head.b_y,
        }
    }

    /// Assembles a model from tensors, checking every shape against `config`.
    pub fn from_tensors(
        config: ModelConfig,
        mut take: impl FnMut(ParamId) -> Option<Matrix<T>>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut model = LstmClassifier {
            embedding: EmbeddingTable {
                table: Matrix::zeros(0, 0),
            },
            lstm: LstmParams::zeros(0, 0),
            head: ClassifierHead {
                w_y: Matrix::zeros(0, 0),
                b_y: Matrix::zeros(0, 0),
            },
            config,
        };
        for id in ParamId::ALL {
            let tensor =
                take(id).ok_or_else(|| ModelError::Dimension(format!("missing tensor `{id}`")))?;
            let expected = id.shape(&model.config);
            if tensor.shape() != expected {
                return Err(ModelError::Dimension(format!(
                    "tensor `{id}` has shape {:?}, expected {expected:?}",
                    tensor.shape()
                )));
            }
            *model.tensor_mut(id) = tensor;
        }
        Ok(model)
    }

    pub fn is_finite(&self) -> bool {
        ParamId::ALL.iter().all(|&id| self.tensor(id).is_finite())
    }

    /// Largest absolute parameter value across all tensors.
    pub fn max_abs_param(&self) -> T {
        ParamId::ALL
            .iter()
            .map(|&id| self.tensor(id).max_abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Runs the cell over the valid prefix of `seq` and classifies the final state.
    pub fn forward(&self, seq: &EncodedSequence) -> Result<ForwardPass<T>, ModelError> {
        if seq.valid_len == 0
            || seq.valid_len > self.config.max_len
            || seq.valid_len > seq.ids.len()
        {
            return Err(ModelError::BadValidLength {
                valid_len: seq.valid_len,
                max_len: self.config.max_len,
            });
        }
        if let Some(&id) = seq
            .ids
            .iter()
            .find(|&&id| id as usize >= self.config.vocab_size)
        {
            return Err(ModelError::TokenOutOfRange {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        let mut state = LstmState::zeros(self.config.hidden_dim);
        let mut caches = Vec::with_capacity(seq.valid_len);
        for &id in seq.valid_ids() {
            let x = self.embedding.lookup(id)?;
            let (next, cache) = lstm_step(&self.lstm, &x, &state)?;
            caches.push(cache);
            state = next;
        }
        let logits =
            crate::numerics::add(&matmul(&self.head.w_y, &state.h)?, &self.head.b_y)?.into_values();
        let probs = softmax(&logits)?;
        Ok(ForwardPass {
            logits,
            probs,
            caches,
        })
    }

    /// Class probabilities for `seq`.
    pub fn probabilities(&self, seq: &EncodedSequence) -> Result<Vec<T>, ModelError> {
        Ok(self.forward(seq)?.probs)
    }
}

/// How probabilities become a class decision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DecisionPolicy {
    /// Highest probability; ties go to the lowest class index.
    #[default]
    Argmax,
    /// Binary models only: class 1 when `p[1] >= threshold`.
    PositiveThreshold(f64),
}

impl DecisionPolicy {
    pub fn decide<T: Real>(self, probs: &[T]) -> usize {
        match self {
            DecisionPolicy::PositiveThreshold(t) if probs.len() == 2 => {
                usize::from(probs[1].to_f64() >= t)
            }
            _ => argmax(probs),
        }
    }
}

/// Index of the maximum; the first index wins ties.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub class: usize,
    pub probs: Vec<T>,
}

/// Tags, tokenizes, encodes and classifies one raw text.
pub fn predict<T: Real>(
    model: &LstmClassifier<T>,
    vocab: &Vocabulary,
    text: &str,
    policy: DecisionPolicy,
) -> Result<Prediction<T>, ModelError> {
    let seq = prepare_text(text, vocab, model.config.max_len)?;
    let probs = model.probabilities(&seq)?;
    Ok(Prediction {
        class: policy.decide(&probs),
        probs,
    })
}
