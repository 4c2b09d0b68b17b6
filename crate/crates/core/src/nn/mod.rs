//! From-scratch implementation of the six-layer sequence classifier:
//! embedding, bidirectional LSTM, global max pooling, dropout, two dense
//! layers, and an elementwise sigmoid over two outputs. Training runs full
//! backpropagation through time with the Adam optimizer, entirely in f64
//! so analytic gradients can be checked against central finite differences.

mod adam;
mod checkpoint;
mod mat;
mod math;
mod model;
mod params;
mod train;

pub use adam::{AdamHyper, AdamState};
pub use checkpoint::{
    load_model, load_model_bytes, save_model, save_model_bytes, CheckpointError, FloatWidth,
};
pub use mat::{dot, Mat};
pub use model::{
    batch_gradients, bce_loss, bilstm_forward, dropout_apply, global_max_pool, lstm_cell_step,
    model_forward, BatchItem, DropoutMode, Gradients,
};
pub use params::{LstmWeights, ModelParams};
pub use train::{train, EpochStats, TrainOptions, TrainOutcome};

use crate::dataset::SequenceMode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("token index {index} out of vocabulary range {vocab_size}")]
    IndexOutOfVocab { index: u32, vocab_size: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("numeric failure: non-finite loss at epoch {epoch}, batch {batch}")]
    NumericFailure { epoch: usize, batch: usize },
}

/// Hyperparameters and dimensions of the classifier.
///
/// The defaults reproduce the tuned configuration: 64 LSTM nodes per
/// direction, dropout 0.2, a 128-to-64 first dense layer and a 64-to-2
/// second dense layer. Embedding width is not dictated by the architecture
/// and defaults to 32.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub mode: SequenceMode,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub maxlen: usize,
    pub dropout_rate: f64,
    pub dense_hidden: usize,
    pub num_outputs: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Tuned defaults for the given mode and vocabulary, with the mode's
    /// default maximum sequence length (8 for ISM, 30 for BSM).
    pub fn new(mode: SequenceMode, vocab_size: usize, seed: u64) -> Self {
        ModelConfig {
            mode,
            vocab_size,
            embed_dim: 32,
            hidden: 64,
            maxlen: mode.default_maxlen(),
            dropout_rate: 0.2,
            dense_hidden: 64,
            num_outputs: 2,
            seed,
        }
    }

    /// Width of the pooled feature vector: both LSTM directions
    /// concatenated.
    pub fn pooled_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn validate(&self) -> Result<(), NnError> {
        for (name, value) in [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("maxlen", self.maxlen),
            ("dense_hidden", self.dense_hidden),
            ("num_outputs", self.num_outputs),
        ] {
            if value == 0 {
                return Err(NnError::InvalidConfig(format!("{name} must be non-zero")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::InvalidRate(self.dropout_rate));
        }
        Ok(())
    }
}
