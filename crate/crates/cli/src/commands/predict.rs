use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use runtrace_core::dataset::sequence_texts;
use runtrace_core::nn::{load_model, model_forward, DropoutMode};
use runtrace_core::text::{tokenize, Vocabulary};
use runtrace_core::trace::{load_trace, Label, DEFAULT_INSTRUCTION_CAP};

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Vocabulary saved at training time [default: <model>.vocab.tsv]
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Run-trace file to score
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Instruction cap per trace file
    #[arg(long, default_value_t = DEFAULT_INSTRUCTION_CAP)]
    pub cap: usize,
}

/// Prints one line per sequence: `ordinal<TAB>p_malicious<TAB>verdict`.
pub fn run(args: PredictArgs) -> Result<()> {
    let (config, params) = load_model(&args.model)?;
    let vocab_path = args
        .vocab
        .unwrap_or_else(|| args.model.with_extension("vocab.tsv"));
    let vocab = Vocabulary::load(&vocab_path)
        .with_context(|| format!("loading vocabulary {}", vocab_path.display()))?;
    if vocab.size() != config.vocab_size {
        bail!(
            "vocabulary size {} does not match model vocab_size {}",
            vocab.size(),
            config.vocab_size
        );
    }

    // the stored label is irrelevant for scoring
    let trace = load_trace(&args.trace, Label::Benign, args.cap)?;
    let texts = sequence_texts(&trace, config.mode)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (ordinal, text) in texts.iter().enumerate() {
        let tokens = tokenize(text)?;
        let seq = vocab.encode(&tokens, config.maxlen);
        let probs = model_forward(&seq, &params, &config, DropoutMode::Infer)?;
        let verdict = if probs[1] > probs[0] {
            Label::Malicious
        } else {
            Label::Benign
        };
        if let Err(e) = writeln!(out, "{ordinal}\t{:.6}\t{verdict}", probs[1]) {
            // a closed pipe (e.g. `predict | head`) is not an error
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(e.into());
        }
    }
    Ok(())
}
