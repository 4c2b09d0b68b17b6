use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use runtrace_core::dataset::collect_texts;
use runtrace_core::metrics::{checksum, evaluate, EvalReport};
use runtrace_core::nn::load_model_bytes;
use runtrace_core::pipeline::encode_texts;
use runtrace_core::text::Vocabulary;
use runtrace_core::trace::DEFAULT_INSTRUCTION_CAP;

use crate::corpus::load_corpus;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Vocabulary saved at training time [default: <model>.vocab.tsv]
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Corpus directory with malicious/ and benign/ subdirectories
    #[arg(long = "test-dir", value_name = "DIR")]
    pub test_dir: PathBuf,
    /// Report output path (JSON)
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Instruction cap per trace file
    #[arg(long, default_value_t = DEFAULT_INSTRUCTION_CAP)]
    pub cap: usize,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let bytes =
        std::fs::read(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let (config, params) = load_model_bytes(&bytes)?;
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

    let traces = load_corpus(&args.test_dir, args.cap)?;
    let mut texts = Vec::new();
    for trace in &traces {
        texts.extend(collect_texts(trace, config.mode)?);
    }
    let sequences = encode_texts(&texts, &vocab, config.maxlen)?;
    let cm = evaluate(&params, &config, &sequences)?;
    let report = EvalReport::new(&cm, &config, checksum(&bytes))?;
    std::fs::write(&args.report, report.to_json())
        .with_context(|| format!("writing {}", args.report.display()))?;
    println!("{}", report.human_summary());
    Ok(())
}
