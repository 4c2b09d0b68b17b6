//! End-to-end dataset preparation shared by the CLI, tests, and library
//! users: traces -> labeled sequence texts -> seeded split -> vocabulary
//! built over the training partition only -> encoded partitions. Building
//! the vocabulary after the split keeps test tokens from leaking into it;
//! tokens unseen in training encode as OOV.

use rayon::prelude::*;

use crate::dataset::{
    self, collect_texts, DatasetError, DatasetSplit, LabeledSequence, SequenceMode, SequenceText,
    Split,
};
use crate::text::{tokenize, Vocabulary};
use crate::trace::RunTrace;

/// A prepared dataset: the vocabulary, the encoded partitions, and the
/// text-level split the manifest is written from.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub split: DatasetSplit,
    pub text_split: Split<SequenceText>,
}

/// Splits first, then builds the vocabulary from the training texts (in
/// their shuffled order) and encodes all three partitions.
pub fn prepare(
    traces: &[RunTrace],
    mode: SequenceMode,
    maxlen: usize,
    seed: u64,
    vocab_cap: Option<usize>,
) -> Result<PreparedData, DatasetError> {
    let mut texts = Vec::new();
    for trace in traces {
        texts.extend(collect_texts(trace, mode)?);
    }
    let text_split = dataset::split(texts, seed)?;
    let vocab = Vocabulary::build(text_split.train.iter().map(|t| t.text.as_str()), vocab_cap)?;
    let encode_part = |part: &[SequenceText]| -> Result<Vec<LabeledSequence>, DatasetError> {
        part.par_iter()
            .map(|st| {
                let tokens = tokenize(&st.text)?;
                Ok(LabeledSequence {
                    sequence: vocab.encode(&tokens, maxlen),
                    label: st.label,
                    source_id: std::sync::Arc::clone(&st.source_id),
                    ordinal: st.ordinal,
                })
            })
            .collect()
    };
    let split = DatasetSplit {
        train: encode_part(&text_split.train)?,
        validation: encode_part(&text_split.validation)?,
        test: encode_part(&text_split.test)?,
        seed,
    };
    Ok(PreparedData {
        vocab,
        split,
        text_split,
    })
}

/// Encodes labeled sequence texts with an existing vocabulary, e.g. for
/// evaluating a saved model on a fresh corpus.
pub fn encode_texts(
    texts: &[SequenceText],
    vocab: &Vocabulary,
    maxlen: usize,
) -> Result<Vec<LabeledSequence>, DatasetError> {
    texts
        .par_iter()
        .map(|st| {
            let tokens = tokenize(&st.text)?;
            Ok(LabeledSequence {
                sequence: vocab.encode(&tokens, maxlen),
                label: st.label,
                source_id: std::sync::Arc::clone(&st.source_id),
                ordinal: st.ordinal,
            })
        })
        .collect()
}
