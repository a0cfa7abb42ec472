//! Text preprocessing: entity tagging, tokenization, vocabulary and
//! fixed-length encoding.

mod entities;
mod tokenize;
mod vocab;

pub use entities::{find_entities, tag_entities, EntityKind, EntitySpan};
pub use tokenize::{is_sentinel, tokenize};
pub use vocab::{
    build_vocabulary, decode, encode, EncodedSequence, Vocabulary, DEFAULT_MAX_LEN,
    DEFAULT_MAX_VOCAB, DEFAULT_MIN_FREQ, PAD_ID, PAD_TOKEN, RESERVED_TOKENS, UNK_ID, UNK_TOKEN,
    VOCAB_FORMAT_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("cannot encode an empty token list")]
    EmptyTokens,
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
    #[error("max vocabulary size {0} leaves no room beyond the reserved tokens")]
    MaxSizeTooSmall(usize),
    #[error("duplicate vocabulary token `{0}`")]
    DuplicateToken(String),
    #[error("unsupported vocabulary version {0}")]
    UnsupportedVersion(u32),
    #[error("vocabulary reserved tokens do not match this build")]
    ReservedMismatch,
    #[error("malformed vocabulary file: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Full preprocessing chain for one raw text: tag, tokenize, encode.
pub fn prepare_text(
    text: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedSequence, TextprepError> {
    encode(&tokenize(&tag_entities(text)), vocab, max_len)
}

/// Tag-then-tokenize, the token stream fed to vocabulary building.
pub fn text_tokens(text: &str) -> Vec<String> {
    tokenize(&tag_entities(text))
}
