use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TextprepError;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// Reserved tokens in id order: padding, unknown, then the entity sentinels.
pub const RESERVED_TOKENS: [&str; 9] = [
    PAD_TOKEN, UNK_TOKEN, "<IP>", "<URL>", "<EMAIL>", "<CVE>", "<HASH>", "<BTC>", "<CARD>",
];

pub const VOCAB_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_VOCAB: usize = 20_000;
pub const DEFAULT_MIN_FREQ: usize = 2;
pub const DEFAULT_MAX_LEN: usize = 250;

/// Token to id mapping with reserved ids `0..RESERVED_TOKENS.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    reserved: Vec<String>,
    tokens: Vec<String>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self, TextprepError> {
        let mut id_to_token: Vec<String> = RESERVED_TOKENS.iter().map(|t| t.to_string()).collect();
        id_to_token.extend(tokens);
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (id, token) in id_to_token.iter().enumerate() {
            if token_to_id.insert(token.clone(), id as u32).is_some() {
                return Err(TextprepError::DuplicateToken(token.clone()));
            }
        }
        Ok(Self {
            id_to_token,
            token_to_id,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Id for `token`, falling back to [`UNK_ID`].
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn learned_tokens(&self) -> &[String] {
        &self.id_to_token[RESERVED_TOKENS.len()..]
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            version: VOCAB_FORMAT_VERSION,
            reserved: RESERVED_TOKENS.iter().map(|t| t.to_string()).collect(),
            tokens: self.learned_tokens().to_vec(),
        };
        serde_json::to_string(&file).expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TextprepError> {
        let file: VocabFile =
            serde_json::from_str(json).map_err(|e| TextprepError::Format(e.to_string()))?;
        if file.version != VOCAB_FORMAT_VERSION {
            return Err(TextprepError::UnsupportedVersion(file.version));
        }
        if file.reserved != RESERVED_TOKENS {
            return Err(TextprepError::ReservedMismatch);
        }
        Self::from_tokens(file.tokens)
    }

    /// Hex SHA-256 of the serialized vocabulary.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TextprepError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| TextprepError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, TextprepError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| TextprepError::Io(path.display().to_string(), e))?;
        Self::from_json(&json)
    }
}

/// Builds a vocabulary from token streams.
///
/// Tokens are ranked by descending frequency with lexicographic tie-breaks;
/// those below `min_freq` are dropped and the result is capped at `max_size`
/// entries including the reserved ones.
pub fn build_vocabulary<I, S>(
    token_streams: I,
    max_size: usize,
    min_freq: usize,
) -> Result<Vocabulary, TextprepError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[String]>,
{
    if max_size <= RESERVED_TOKENS.len() {
        return Err(TextprepError::MaxSizeTooSmall(max_size));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let streams: Vec<S> = token_streams.into_iter().collect();
    for stream in &streams {
        for token in stream.as_ref() {
            if !RESERVED_TOKENS.contains(&token.as_str()) {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_freq.max(1))
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED_TOKENS.len());
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()).collect())
}

/// Fixed-length, right-padded id sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub valid_len: usize,
}

impl EncodedSequence {
    /// Ids of the non-pad prefix.
    pub fn valid_ids(&self) -> &[u32] {
        &self.ids[..self.valid_len]
    }
}

/// Maps tokens to ids, keeping the first `max_len` and right-padding with PAD.
pub fn encode(
    tokens: &[String],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedSequence, TextprepError> {
    if tokens.is_empty() {
        return Err(TextprepError::EmptyTokens);
    }
    if max_len == 0 {
        return Err(TextprepError::ZeroMaxLen);
    }
    let mut ids: Vec<u32> = tokens
        .iter()
        .take(max_len)
        .map(|t| match vocab.id_or_unk(t) {
            PAD_ID => UNK_ID,
            id => id,
        })
        .collect();
    let valid_len = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(EncodedSequence { ids, valid_len })
}

/// Surface tokens for the valid prefix of `seq`.
pub fn decode(seq: &EncodedSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.valid_ids()
        .iter()
        .map(|&id| vocab.token(id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}
