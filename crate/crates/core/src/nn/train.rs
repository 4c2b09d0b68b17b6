//! Mini-batch training loop.
//!
//! Each epoch shuffles the training set with an epoch-derived seed and
//! walks it in mini-batches: forward with per-item dropout masks, backward,
//! one Adam step. Batch items are processed in fixed-size chunks that
//! parallelize across threads; chunk gradients are summed in chunk order,
//! so the result is bit-identical regardless of thread count. Validation
//! runs in inference mode and never contributes gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamHyper, AdamState};
use super::model::{backward_into, bce_loss, forward_cached, DropoutMode};
use super::params::ModelParams;
use super::{ModelConfig, NnError};
use crate::dataset::LabeledSequence;
use crate::rng::{derive_seed, Rng};
use crate::trace::Label;

// Seed stream tags (see also params::INIT_STREAM).
const SHUFFLE_STREAM: u64 = 0x02;
const DROPOUT_STREAM: u64 = 0x03;

// Items per gradient chunk. Fixed so the summation order, and therefore
// the trained parameters, do not depend on the machine's thread count.
const GRAD_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    /// Print per-epoch progress to stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 3,
            batch_size: 256,
            adam: AdamHyper::default(),
            verbose: false,
        }
    }
}

/// Loss and accuracy recorded after each epoch. Training numbers are the
/// running statistics of the epoch's training batches (with dropout
/// active); validation numbers come from a full inference pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
}

pub(crate) fn target_of(label: Label) -> [f64; 2] {
    match label {
        Label::Benign => [1.0, 0.0],
        Label::Malicious => [0.0, 1.0],
    }
}

pub(crate) fn predicted_label(probs: &[f64]) -> Label {
    if probs[1] > probs[0] {
        Label::Malicious
    } else {
        Label::Benign
    }
}

/// Mean loss and accuracy of an inference pass over a set. Work is
/// sharded in fixed chunks and reduced in chunk order.
pub(crate) fn eval_stats(
    params: &ModelParams,
    config: &ModelConfig,
    set: &[LabeledSequence],
) -> Result<(f64, f64), NnError> {
    if set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let partials: Result<Vec<(f64, usize)>, NnError> = set
        .par_chunks(1024)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut correct = 0usize;
            for item in chunk {
                let cache =
                    forward_cached(params, config, &item.sequence.indices, DropoutMode::Infer)?;
                loss += bce_loss(&cache.probs, &target_of(item.label));
                if predicted_label(&cache.probs) == item.label {
                    correct += 1;
                }
            }
            Ok((loss, correct))
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (l, c) in partials? {
        loss += l;
        correct += c;
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

/// One mini-batch over `batch` (indices into the training set). Returns
/// the loss sum, correct-prediction count, and unscaled gradient sum.
fn run_batch(
    params: &ModelParams,
    config: &ModelConfig,
    train_set: &[LabeledSequence],
    batch: &[usize],
    dropout_base: u64,
    item_counter_base: u64,
) -> Result<(f64, usize, ModelParams), NnError> {
    let chunk_results: Result<Vec<(f64, usize, ModelParams)>, NnError> = batch
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut grads = ModelParams::zeros(config);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for (offset, &ix) in chunk.iter().enumerate() {
                let item = &train_set[ix];
                let counter = item_counter_base + (chunk_idx * GRAD_CHUNK + offset) as u64;
                let mask_seed = derive_seed(dropout_base, counter);
                let target = target_of(item.label);
                let cache = forward_cached(
                    params,
                    config,
                    &item.sequence.indices,
                    DropoutMode::Train { mask_seed },
                )?;
                loss_sum += bce_loss(&cache.probs, &target);
                if predicted_label(&cache.probs) == item.label {
                    correct += 1;
                }
                backward_into(
                    params,
                    config,
                    &cache,
                    &target,
                    &item.sequence.indices,
                    &mut grads,
                );
            }
            Ok((loss_sum, correct, grads))
        })
        .collect();

    let mut total = ModelParams::zeros(config);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (l, c, g) in chunk_results? {
        loss_sum += l;
        correct += c;
        total.add_scaled(&g, 1.0);
    }
    Ok((loss_sum, correct, total))
}

/// Trains a fresh model initialized from `config.seed`. Deterministic for
/// fixed data, config, and options.
pub fn train(
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    config: &ModelConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome, NnError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if opts.batch_size == 0 {
        return Err(NnError::InvalidConfig("batch_size must be >= 1".into()));
    }
    config.validate()?;

    let mut params = ModelParams::init(config)?;
    let mut adam = AdamState::new(config, opts.adam);
    let mut history = Vec::with_capacity(opts.epochs);
    let dropout_base = derive_seed(config.seed, DROPOUT_STREAM);
    let shuffle_base = derive_seed(config.seed, SHUFFLE_STREAM);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..opts.epochs {
        let mut rng = Rng::seed_from(derive_seed(shuffle_base, epoch as u64));
        rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        let mut seen = 0usize;
        for (batch_idx, batch) in order.chunks(opts.batch_size).enumerate() {
            let item_counter_base = (epoch * train_set.len() + seen) as u64;
            let (loss_sum, correct, mut grads) = run_batch(
                &params,
                config,
                train_set,
                batch,
                dropout_base,
                item_counter_base,
            )?;
            if !loss_sum.is_finite() {
                return Err(NnError::NumericFailure {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads)?;
            if !params.all_finite() {
                return Err(NnError::NumericFailure {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            epoch_loss += loss_sum;
            epoch_correct += correct;
            seen += batch.len();
        }

        let (val_loss, val_accuracy) = eval_stats(&params, config, val_set)?;
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: epoch_loss / seen as f64,
            train_accuracy: epoch_correct as f64 / seen as f64,
            val_loss,
            val_accuracy,
        };
        if opts.verbose {
            eprintln!(
                "epoch {}/{}: train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4}",
                stats.epoch,
                opts.epochs,
                stats.train_loss,
                stats.train_accuracy,
                stats.val_loss,
                stats.val_accuracy
            );
        }
        history.push(stats);
    }

    Ok(TrainOutcome { params, history })
}
