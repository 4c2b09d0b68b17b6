//! Run-trace classification pipeline.
//!
//! Parses x86 run-trace text files, segments them into basic blocks,
//! tokenizes and encodes instruction or block sequences, trains a
//! bidirectional-LSTM binary classifier from scratch, and reports
//! confusion-matrix metrics. A deterministic synthetic corpus generator
//! makes the whole pipeline exercisable without real malware.

/// Basic-block segmentation.
pub mod block;

/// Sequence labeling and dataset splitting.
pub mod dataset;

/// Confusion-matrix metrics and model evaluation.
pub mod metrics;

/// The embedding/BiLSTM/dense classifier and its training loop.
pub mod nn;

/// End-to-end dataset preparation.
pub mod pipeline;

/// Deterministic random number generation.
pub mod rng;

/// Synthetic run-trace corpus generation.
pub mod synth;

/// Tokenization, vocabulary, and sequence encoding.
pub mod text;

/// Run-trace file parsing.
pub mod trace;
