//! Model checkpoint serialization.
//!
//! Layout (all multi-byte integers little-endian):
//!
//! ```text
//! magic          b"RTLM"
//! version        u16 (currently 1)
//! config         mode u8 (0 = ism, 1 = bsm), then u64 fields vocab_size,
//!                embed_dim, hidden, maxlen, dense_hidden, num_outputs,
//!                seed, then dropout_rate f64
//! tensor count   u32
//! per tensor     name (u16 length + UTF-8), rank u8, dims (u64 each),
//!                dtype u8 (0 = f64, 1 = f32), row-major values
//! ```
//!
//! Values are stored in f64 by default; the f32 option halves file size at
//! the cost of the bit-exact round trip.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::params::ModelParams;
use super::ModelConfig;
use crate::dataset::SequenceMode;

const MAGIC: &[u8; 4] = b"RTLM";
const VERSION: u16 = 1;

/// Storage precision of tensor values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatWidth {
    F64,
    F32,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("BadMagic: not a model checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    VersionMismatch(u16),
    #[error("tensor {name}: shape mismatch (expected {expected:?}, found {found:?})")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("unknown tensor {0:?} in checkpoint")]
    UnknownTensor(String),
    #[error("tensor {0:?} missing from checkpoint")]
    MissingTensor(&'static str),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Malformed(format!(
                "unexpected end of file at byte {} (wanted {} more)",
                self.pos, n
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Serializes a model to bytes.
pub fn save_model_bytes(config: &ModelConfig, params: &ModelParams, width: FloatWidth) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match config.mode {
        SequenceMode::Ism => 0,
        SequenceMode::Bsm => 1,
    });
    for v in [
        config.vocab_size,
        config.embed_dim,
        config.hidden,
        config.maxlen,
        config.dense_hidden,
        config.num_outputs,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&config.seed.to_le_bytes());
    out.extend_from_slice(&config.dropout_rate.to_le_bytes());

    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for d in &dims {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        match width {
            FloatWidth::F64 => {
                out.push(0);
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            FloatWidth::F32 => {
                out.push(1);
                for v in values {
                    out.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

/// Writes a checkpoint file.
pub fn save_model(
    path: &Path,
    config: &ModelConfig,
    params: &ModelParams,
    width: FloatWidth,
) -> Result<(), CheckpointError> {
    fs::write(path, save_model_bytes(config, params, width))?;
    Ok(())
}

/// Deserializes a model from bytes, validating magic, version, and every
/// tensor shape. Truncated or oversized input fails loudly.
pub fn load_model_bytes(bytes: &[u8]) -> Result<(ModelConfig, ModelParams), CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch(version));
    }
    let mode = match r.u8()? {
        0 => SequenceMode::Ism,
        1 => SequenceMode::Bsm,
        other => {
            return Err(CheckpointError::Malformed(format!(
                "unknown mode tag {other}"
            )))
        }
    };
    let vocab_size = r.u64()? as usize;
    let embed_dim = r.u64()? as usize;
    let hidden = r.u64()? as usize;
    let maxlen = r.u64()? as usize;
    let dense_hidden = r.u64()? as usize;
    let num_outputs = r.u64()? as usize;
    let seed = r.u64()?;
    let dropout_rate = r.f64()?;
    let config = ModelConfig {
        mode,
        vocab_size,
        embed_dim,
        hidden,
        maxlen,
        dropout_rate,
        dense_hidden,
        num_outputs,
        seed,
    };
    config
        .validate()
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    let mut params = ModelParams::zeros(&config);
    let expected: Vec<(&'static str, Vec<usize>)> = params
        .tensors()
        .iter()
        .map(|(n, d, _)| (*n, d.clone()))
        .collect();

    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(CheckpointError::Malformed(format!(
            "expected {} tensors, found {}",
            expected.len(),
            count
        )));
    }
    let mut filled = vec![false; expected.len()];
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64()? as usize);
        }
        let slot = expected
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| CheckpointError::UnknownTensor(name.clone()))?;
        if expected[slot].1 != dims {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: expected[slot].1.clone(),
                found: dims,
            });
        }
        if filled[slot] {
            return Err(CheckpointError::Malformed(format!(
                "tensor {name:?} appears twice"
            )));
        }
        let len: usize = dims.iter().product();
        let dtype = r.u8()?;
        let dest = params.tensor_mut(&name).unwrap();
        match dtype {
            0 => {
                let raw = r.take(len * 8)?;
                for (v, chunk) in dest.iter_mut().zip(raw.chunks_exact(8)) {
                    *v = f64::from_le_bytes(chunk.try_into().unwrap());
                }
            }
            1 => {
                let raw = r.take(len * 4)?;
                for (v, chunk) in dest.iter_mut().zip(raw.chunks_exact(4)) {
                    *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
                }
            }
            other => {
                return Err(CheckpointError::Malformed(format!(
                    "unknown dtype tag {other}"
                )))
            }
        }
        filled[slot] = true;
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(CheckpointError::MissingTensor(expected[missing].0));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after tensor table",
            bytes.len() - r.pos
        )));
    }
    Ok((config, params))
}

/// Reads a checkpoint file.
pub fn load_model(path: &Path) -> Result<(ModelConfig, ModelParams), CheckpointError> {
    load_model_bytes(&fs::read(path)?)
}
