use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use runtrace_core::block::{render_bsm, segment};
use runtrace_core::trace::{load_trace, Label, DEFAULT_INSTRUCTION_CAP};

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Run-trace file, one instruction per line
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output file, one basic block per line
    #[arg(long = "out", value_name = "FILE")]
    pub output: PathBuf,
    /// Instruction cap per file
    #[arg(long, default_value_t = DEFAULT_INSTRUCTION_CAP)]
    pub cap: usize,
}

pub fn run(args: SegmentArgs) -> Result<()> {
    // the label does not matter for segmentation
    let trace = load_trace(&args.input, Label::Benign, args.cap)?;
    if trace.truncated {
        eprintln!(
            "warning: {} truncated at {} instructions",
            trace.source_id, args.cap
        );
    }
    let blocks = segment(&trace)?;
    std::fs::write(&args.output, render_bsm(&blocks))
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("blocks={}", blocks.len());
    Ok(())
}
