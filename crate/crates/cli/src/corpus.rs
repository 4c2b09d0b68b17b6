//! Labeled corpus directory loading. Labels come from the directory
//! structure: `<corpus>/malicious/*.txt` and `<corpus>/benign/*.txt`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use runtrace_core::trace::{load_trace, Label, RunTrace};

/// Loads every trace under the two class subdirectories, in sorted path
/// order so downstream vocabulary construction is reproducible.
pub fn load_corpus(dir: &Path, cap: usize) -> Result<Vec<RunTrace>> {
    let mut traces = Vec::new();
    for label in [Label::Malicious, Label::Benign] {
        let class_dir = dir.join(label.as_str());
        if !class_dir.is_dir() {
            bail!(
                "corpus {} has no {}/ subdirectory",
                dir.display(),
                label.as_str()
            );
        }
        let mut paths: Vec<_> = std::fs::read_dir(&class_dir)
            .with_context(|| format!("reading {}", class_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        if paths.is_empty() {
            bail!("no trace files under {}", class_dir.display());
        }
        let loaded: Result<Vec<RunTrace>> = paths
            .par_iter()
            .map(|p| load_trace(p, label, cap).map_err(anyhow::Error::from))
            .collect();
        traces.extend(loaded?);
    }
    for t in &traces {
        if t.truncated {
            eprintln!("warning: {} truncated at {} instructions", t.source_id, cap);
        }
    }
    Ok(traces)
}
