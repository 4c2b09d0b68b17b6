//! Tokenization, vocabulary construction, and fixed-length index encoding.
//!
//! Sequence texts (one instruction or one basic block per sequence) are
//! split on whitespace with separator commas stripped from token tails, so
//! memory expressions like `ss:[ebp-0x30]` survive as single tokens. A
//! vocabulary assigns dense indices starting at 2; index 0 is reserved for
//! padding and index 1 for out-of-vocabulary tokens. Encoding pads on the
//! right with 0 up to the configured maximum length and keeps the head of
//! longer sequences.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Reserved padding index.
pub const PAD_INDEX: u32 = 0;
/// Reserved out-of-vocabulary index.
pub const OOV_INDEX: u32 = 1;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no tokens left after tokenization")]
    EmptyAfterTokenize,
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("vocabulary line {line}: index {index} is reserved")]
    ReservedIndexUsed { line: usize, index: u32 },
    #[error("vocabulary line {line}: malformed entry {text:?}")]
    MalformedEntry { line: usize, text: String },
    #[error("vocabulary indices do not form a dense range starting at 2")]
    NonDenseIndices,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits sequence text into tokens: whitespace-delimited, trailing commas
/// stripped, empty tokens dropped.
pub fn tokenize(text: &str) -> Result<Vec<String>, TextError> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| t.trim_end_matches(','))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(TextError::EmptyAfterTokenize);
    }
    Ok(tokens)
}

/// Token-to-index map with reserved padding (0) and OOV (1) indices.
/// Assigned indices form the dense range `[2, size)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, u32>,
    // position i holds the token assigned index i + 2
    index_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary over a corpus of sequence texts.
    ///
    /// Tokens are indexed by descending corpus frequency, ties broken by
    /// first occurrence, starting at index 2 — deterministic for a fixed
    /// corpus order. With `cap` set, only the top `cap` tokens are kept and
    /// the rest encode as OOV.
    pub fn build<I, S>(corpus: I, cap: Option<usize>) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        let mut first_seen = 0usize;
        let mut saw_sequence = false;
        for text in corpus {
            saw_sequence = true;
            for token in tokenize(text.as_ref())? {
                let entry = counts.entry(token).or_insert_with(|| {
                    let order = first_seen;
                    first_seen += 1;
                    (0, order)
                });
                entry.0 += 1;
            }
        }
        if !saw_sequence {
            return Err(TextError::EmptyCorpus);
        }
        let mut entries: Vec<(String, u64, usize)> = counts
            .into_iter()
            .map(|(token, (count, order))| (token, count, order))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        if let Some(cap) = cap {
            entries.truncate(cap);
        }
        let index_to_token: Vec<String> = entries.into_iter().map(|(t, _, _)| t).collect();
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 2))
            .collect();
        Ok(Vocabulary {
            token_to_index,
            index_to_token,
        })
    }

    /// Distinct tokens plus the two reserved indices.
    pub fn size(&self) -> usize {
        self.index_to_token.len() + 2
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.token_to_index.get(token).copied()
    }

    /// Inverse lookup; `None` for the reserved indices and out-of-range.
    pub fn token_at(&self, index: u32) -> Option<&str> {
        if index < 2 {
            return None;
        }
        self.index_to_token
            .get(index as usize - 2)
            .map(String::as_str)
    }

    /// Encodes tokens into a fixed-length index sequence: known tokens map
    /// to their index, unknown to [`OOV_INDEX`], right-padded with
    /// [`PAD_INDEX`] or head-truncated to exactly `maxlen`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], maxlen: usize) -> TokenSequence {
        assert!(maxlen >= 1, "maxlen must be at least 1");
        let mut indices = Vec::with_capacity(maxlen);
        for token in tokens.iter().take(maxlen) {
            indices.push(
                self.token_to_index
                    .get(token.as_ref())
                    .copied()
                    .unwrap_or(OOV_INDEX),
            );
        }
        let true_length = indices.len();
        indices.resize(maxlen, PAD_INDEX);
        TokenSequence {
            indices,
            true_length,
        }
    }

    /// Writes `token<TAB>index` lines, LF-terminated, in index order.
    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let mut out = String::new();
        for (i, token) in self.index_to_token.iter().enumerate() {
            out.push_str(token);
            out.push('\t');
            out.push_str(&(i as u32 + 2).to_string());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Loads a vocabulary file, enforcing reserved-index, uniqueness, and
    /// dense-range invariants.
    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = fs::read_to_string(path)?;
        let mut slots: Vec<Option<String>> = Vec::new();
        let mut seen: HashMap<String, ()> = HashMap::new();
        let mut entries = 0usize;
        for (idx, line) in text.split('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (token, index_text) =
                line.split_once('\t')
                    .ok_or_else(|| TextError::MalformedEntry {
                        line: lineno,
                        text: line.to_string(),
                    })?;
            let index: u32 = index_text.parse().map_err(|_| TextError::MalformedEntry {
                line: lineno,
                text: line.to_string(),
            })?;
            if index == PAD_INDEX || index == OOV_INDEX {
                return Err(TextError::ReservedIndexUsed {
                    line: lineno,
                    index,
                });
            }
            if seen.insert(token.to_string(), ()).is_some() {
                return Err(TextError::DuplicateToken {
                    line: lineno,
                    token: token.to_string(),
                });
            }
            let slot = index as usize - 2;
            if slot >= slots.len() {
                slots.resize(slot + 1, None);
            }
            if slots[slot].is_some() {
                return Err(TextError::NonDenseIndices);
            }
            slots[slot] = Some(token.to_string());
            entries += 1;
        }
        if slots.len() != entries {
            return Err(TextError::NonDenseIndices);
        }
        let index_to_token: Vec<String> = slots.into_iter().map(Option::unwrap).collect();
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 2))
            .collect();
        Ok(Vocabulary {
            token_to_index,
            index_to_token,
        })
    }
}

/// Fixed-length encoded sequence. `indices` always has exactly the
/// configured maximum length; pad entries occupy a contiguous suffix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub indices: Vec<u32>,
    /// Non-pad positions before padding/truncation was applied.
    pub true_length: usize,
}
