use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use runtrace_core::rng::derive_seed;
use runtrace_core::synth::{
    default_grammars, write_corpus, TraceGrammar, DEFAULT_LEN_RANGE, DEFAULT_TRACES_PER_CLASS,
};
use runtrace_core::trace::Label;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Which class to generate: malicious, benign, or both
    #[arg(long = "class", value_name = "CLASS")]
    pub class: ClassArg,
    /// Traces per class
    #[arg(long, default_value_t = DEFAULT_TRACES_PER_CLASS)]
    pub n: usize,
    /// Corpus seed; each class derives its own substream, so generating
    /// one class matches that class's half of a `both` run
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory; files land under <out>/<class>/
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Minimum trace length
    #[arg(long, default_value_t = DEFAULT_LEN_RANGE.0)]
    pub min_len: usize,
    /// Maximum trace length
    #[arg(long, default_value_t = DEFAULT_LEN_RANGE.1)]
    pub max_len: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum ClassArg {
    Malicious,
    Benign,
    Both,
}

impl std::str::FromStr for ClassArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "malicious" => Ok(ClassArg::Malicious),
            "benign" => Ok(ClassArg::Benign),
            "both" => Ok(ClassArg::Both),
            other => Err(format!(
                "unknown class {other:?} (expected malicious|benign|both)"
            )),
        }
    }
}

/// Per-class seed substream tags.
fn class_seed(seed: u64, label: Label) -> u64 {
    match label {
        Label::Malicious => derive_seed(seed, 0),
        Label::Benign => derive_seed(seed, 1),
    }
}

pub fn run(args: SynthArgs) -> Result<()> {
    let (malicious, benign) = default_grammars();
    let selected: Vec<&TraceGrammar> = match args.class {
        ClassArg::Malicious => vec![&malicious],
        ClassArg::Benign => vec![&benign],
        ClassArg::Both => vec![&malicious, &benign],
    };
    for grammar in selected {
        let paths = write_corpus(
            &args.out,
            grammar,
            args.n,
            (args.min_len, args.max_len),
            class_seed(args.seed, grammar.label),
        )?;
        println!("{}={}", grammar.label, paths.len());
    }
    Ok(())
}
