use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use runtrace_core::dataset::{write_manifest, SequenceMode};
use runtrace_core::metrics::checksum;
use runtrace_core::nn::{
    save_model_bytes, train, AdamHyper, FloatWidth, ModelConfig, TrainOptions,
};
use runtrace_core::pipeline::prepare;
use runtrace_core::trace::DEFAULT_INSTRUCTION_CAP;

use crate::corpus::load_corpus;
use crate::manifest::RunManifest;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory with malicious/ and benign/ subdirectories
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Data representation: ism (instruction per sequence) or bsm (basic
    /// block per sequence)
    #[arg(long, value_name = "MODE")]
    pub mode: Option<SequenceModeArg>,
    /// Model checkpoint output path
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Vocabulary output path
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Maximum sequence length [default: 8 for ism, 30 for bsm]
    #[arg(long)]
    pub maxlen: Option<usize>,
    /// Training epochs [default: 3]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 256]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Dropout rate after pooling [default: 0.2]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// LSTM nodes per direction [default: 64]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Embedding width [default: 32]
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Seed for split, initialization, shuffling, and dropout [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only the most frequent N tokens; the rest encode as OOV
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    /// Instruction cap per trace file [default: 10000000]
    #[arg(long)]
    pub cap: Option<usize>,
    /// Split manifest output path [default: <model>.manifest]
    #[arg(long, value_name = "FILE")]
    pub split_manifest: Option<PathBuf>,
    /// Per-epoch history output path, JSON [default: <model>.history.json]
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
    /// Store tensors as f32 instead of f64
    #[arg(long)]
    pub f32: bool,
    /// Flat key=value config file; explicit flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// clap-friendly wrapper so `--mode bsm` parses via FromStr.
#[derive(Clone, Copy, Debug)]
pub struct SequenceModeArg(pub SequenceMode);

impl std::str::FromStr for SequenceModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(SequenceModeArg)
    }
}

impl std::fmt::Display for SequenceModeArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

pub fn run(args: TrainArgs) -> Result<()> {
    let manifest = match &args.config {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest::empty(),
    };
    let mode = manifest
        .resolve_opt(args.mode, "mode")?
        .context("--mode is required (ism|bsm)")?
        .0;
    let corpus = manifest
        .resolve_path(args.corpus, "corpus")
        .context("--corpus is required")?;
    let model_path = manifest
        .resolve_path(args.model, "model")
        .context("--model is required")?;
    let vocab_path = manifest
        .resolve_path(args.vocab, "vocab")
        .unwrap_or_else(|| model_path.with_extension("vocab.tsv"));
    let maxlen = manifest.resolve(args.maxlen, "maxlen", mode.default_maxlen())?;
    let epochs = manifest.resolve(args.epochs, "epochs", 3)?;
    let batch = manifest.resolve(args.batch, "batch", 256)?;
    let lr = manifest.resolve(args.lr, "lr", 0.001)?;
    let dropout = manifest.resolve(args.dropout, "dropout", 0.2)?;
    let hidden = manifest.resolve(args.hidden, "hidden", 64)?;
    let embed_dim = manifest.resolve(args.embed_dim, "embed_dim", 32)?;
    let seed = manifest.resolve(args.seed, "seed", 42)?;
    let cap = manifest.resolve(args.cap, "cap", DEFAULT_INSTRUCTION_CAP)?;
    let vocab_cap = manifest.resolve_opt(args.vocab_cap, "vocab_cap")?;
    let manifest_path = manifest
        .resolve_path(args.split_manifest, "split_manifest")
        .unwrap_or_else(|| model_path.with_extension("manifest"));
    let history_path = manifest
        .resolve_path(args.history, "history")
        .unwrap_or_else(|| model_path.with_extension("history.json"));

    let traces = load_corpus(&corpus, cap)?;
    eprintln!("loaded {} traces from {}", traces.len(), corpus.display());
    let prepared = prepare(&traces, mode, maxlen, seed, vocab_cap)?;
    eprintln!(
        "mode={} vocab={} train={} validation={} test={}",
        mode,
        prepared.vocab.size(),
        prepared.split.train.len(),
        prepared.split.validation.len(),
        prepared.split.test.len()
    );

    let mut config = ModelConfig::new(mode, prepared.vocab.size(), seed);
    config.maxlen = maxlen;
    config.dropout_rate = dropout;
    config.hidden = hidden;
    config.embed_dim = embed_dim;
    let opts = TrainOptions {
        epochs,
        batch_size: batch,
        adam: AdamHyper {
            learning_rate: lr,
            ..AdamHyper::default()
        },
        verbose: true,
    };
    let outcome = train(
        &prepared.split.train,
        &prepared.split.validation,
        &config,
        &opts,
    )?;

    let width = if args.f32 {
        FloatWidth::F32
    } else {
        FloatWidth::F64
    };
    let bytes = save_model_bytes(&config, &outcome.params, width);
    std::fs::write(&model_path, &bytes)
        .with_context(|| format!("writing {}", model_path.display()))?;
    prepared.vocab.save(&vocab_path)?;
    write_manifest(&prepared.text_split, &manifest_path)?;
    std::fs::write(
        &history_path,
        serde_json::to_string_pretty(&outcome.history)?,
    )
    .with_context(|| format!("writing {}", history_path.display()))?;

    for stats in &outcome.history {
        println!(
            "epoch={} train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6}",
            stats.epoch, stats.train_loss, stats.train_accuracy, stats.val_loss, stats.val_accuracy
        );
    }
    println!("model={}", model_path.display());
    println!("checksum={}", checksum(&bytes));
    Ok(())
}
