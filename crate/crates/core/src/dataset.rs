//! Sequence labeling and train/validation/test partitioning.
//!
//! Every sequence (one instruction line or one basic-block line) inherits
//! the label of its source file. Splitting shuffles with a seeded generator
//! and partitions 80/20 into initial-train/test, then 75/25 into
//! train/validation, so the final proportions are 60/20/20. The split is at
//! sequence level: sequences from one file may land in different
//! partitions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::block::{segment, SegmentError};
use crate::rng::Rng;
use crate::text::{tokenize, TextError, TokenSequence, Vocabulary};
use crate::trace::{Label, RunTrace};

/// Minimum dataset size accepted by [`split`].
pub const MIN_SPLIT_SIZE: usize = 5;

const TEST_FRACTION: f64 = 0.20;
const VALIDATION_FRACTION: f64 = 0.25;

/// Data representation: one instruction per sequence or one basic block
/// per sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceMode {
    Ism,
    Bsm,
}

impl SequenceMode {
    /// Tuned maximum sequence length for the representation.
    pub fn default_maxlen(self) -> usize {
        match self {
            SequenceMode::Ism => 8,
            SequenceMode::Bsm => 30,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceMode::Ism => "ism",
            SequenceMode::Bsm => "bsm",
        }
    }
}

impl std::fmt::Display for SequenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SequenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ism" => Ok(SequenceMode::Ism),
            "bsm" => Ok(SequenceMode::Bsm),
            other => Err(format!("unknown mode {other:?} (expected ism|bsm)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {MIN_SPLIT_SIZE} sequences to split, got {0}")]
    TooFewSequences(usize),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A raw sequence text with its provenance, before encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceText {
    pub text: String,
    pub label: Label,
    pub source_id: Arc<str>,
    /// Position of this sequence within its source file.
    pub ordinal: usize,
}

/// An encoded sequence carrying its file label and provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub sequence: TokenSequence,
    pub label: Label,
    pub source_id: Arc<str>,
    pub ordinal: usize,
}

/// Extracts the per-sequence texts of a trace for the given mode: rendered
/// instruction lines for ISM, rendered basic-block lines for BSM.
pub fn sequence_texts(trace: &RunTrace, mode: SequenceMode) -> Result<Vec<String>, SegmentError> {
    match mode {
        SequenceMode::Ism => Ok(trace.instructions.iter().map(|i| i.render()).collect()),
        SequenceMode::Bsm => Ok(segment(trace)?.iter().map(|b| b.render()).collect()),
    }
}

/// Turns a trace into labeled sequence texts, one per instruction or block.
pub fn collect_texts(
    trace: &RunTrace,
    mode: SequenceMode,
) -> Result<Vec<SequenceText>, SegmentError> {
    let source_id: Arc<str> = Arc::from(trace.source_id.as_str());
    Ok(sequence_texts(trace, mode)?
        .into_iter()
        .enumerate()
        .map(|(ordinal, text)| SequenceText {
            text,
            label: trace.label,
            source_id: Arc::clone(&source_id),
            ordinal,
        })
        .collect())
}

/// Encodes labeled texts through a vocabulary into fixed-length sequences.
pub fn collect(
    texts: &[SequenceText],
    vocab: &Vocabulary,
    maxlen: usize,
) -> Result<Vec<LabeledSequence>, TextError> {
    texts
        .iter()
        .map(|st| {
            let tokens = tokenize(&st.text)?;
            Ok(LabeledSequence {
                sequence: vocab.encode(&tokens, maxlen),
                label: st.label,
                source_id: Arc::clone(&st.source_id),
                ordinal: st.ordinal,
            })
        })
        .collect()
}

/// Train/validation/test partition of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

pub type DatasetSplit = Split<LabeledSequence>;

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Shuffles with the seeded generator and partitions into 60/20/20
/// train/validation/test: the last `round(0.2·N)` shuffled items become the
/// test set, and the last `round(0.25·|rest|)` of the remainder become the
/// validation set. Deterministic for a fixed seed.
pub fn split<T>(mut items: Vec<T>, seed: u64) -> Result<Split<T>, DatasetError> {
    let n = items.len();
    if n < MIN_SPLIT_SIZE {
        return Err(DatasetError::TooFewSequences(n));
    }
    let mut rng = Rng::seed_from(seed);
    rng.shuffle(&mut items);
    let n_test = round_half_up(TEST_FRACTION * n as f64);
    let n_initial_train = n - n_test;
    let n_validation = round_half_up(VALIDATION_FRACTION * n_initial_train as f64);
    let test = items.split_off(n_initial_train);
    let validation = items.split_off(n_initial_train - n_validation);
    Ok(Split {
        train: items,
        validation,
        test,
        seed,
    })
}

/// Provenance accessor used by the split manifest.
pub trait ManifestEntry {
    fn source_id(&self) -> &str;
    fn ordinal(&self) -> usize;
}

impl ManifestEntry for SequenceText {
    fn source_id(&self) -> &str {
        &self.source_id
    }
    fn ordinal(&self) -> usize {
        self.ordinal
    }
}

impl ManifestEntry for LabeledSequence {
    fn source_id(&self) -> &str {
        &self.source_id
    }
    fn ordinal(&self) -> usize {
        self.ordinal
    }
}

/// Renders the split manifest: a `seed` line, then `[train]`,
/// `[validation]`, and `[test]` sections listing
/// `source_id<TAB>ordinal` per sequence, so a split can be audited and
/// replayed.
pub fn render_manifest<T: ManifestEntry>(split: &Split<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed\t{}", split.seed);
    for (name, part) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        let _ = writeln!(out, "[{name}]");
        for item in part.iter() {
            let _ = writeln!(out, "{}\t{}", item.source_id(), item.ordinal());
        }
    }
    out
}

/// Writes the split manifest to a file.
pub fn write_manifest<T: ManifestEntry>(split: &Split<T>, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, render_manifest(split))?;
    Ok(())
}
