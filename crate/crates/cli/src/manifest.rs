//! Optional flat key=value run manifest for `train`. Keys mirror the
//! command-line flags; explicit flags take precedence over file values.
//!
//! ```text
//! mode=bsm
//! corpus=./corpus
//! model=./out/model.rtlm
//! vocab=./out/vocab.tsv
//! maxlen=30
//! epochs=3
//! batch=256
//! lr=0.001
//! dropout=0.2
//! hidden=64
//! embed_dim=32
//! seed=42
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub struct RunManifest {
    values: HashMap<String, String>,
}

impl RunManifest {
    pub fn empty() -> Self {
        RunManifest {
            values: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    idx + 1
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RunManifest { values })
    }

    /// Flag value if given, else the manifest value, else the default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.resolve_opt(flag, key)?.map_or(Ok(default), |v| Ok(v))
    }

    /// Flag value if given, else the manifest value if present.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key}={raw:?}: {e}")),
            None => Ok(None),
        }
    }

    pub fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.values.get(key).map(PathBuf::from))
    }
}
