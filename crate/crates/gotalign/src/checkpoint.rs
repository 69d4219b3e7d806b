//! Binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "GOTALNCK"
//! version      u32      FORMAT_VERSION
//! config hash  u64      config::config_hash of the writing run
//! step         u64      optimizer steps already taken
//! count        u32      number of tensors
//! per tensor:
//!   name length u32, name (UTF-8)
//!   rows u32, cols u32
//!   rows·cols f64 parameter values, row-major
//!   rows·cols f64 momentum buffer, row-major
//! ```
//!
//! Values are stored as raw bit patterns, so a save/load roundtrip is exact.

use std::fs;
use std::path::Path;

use gotalign_core::model::{ModelConfig, ModelParams};
use gotalign_core::optim::LarsState;
use gotalign_core::Matrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GOTALNCK";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub step: usize,
    pub params: ModelParams,
    pub state: LarsState,
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&ck.config_hash.to_le_bytes());
    out.extend_from_slice(&(ck.step as u64).to_le_bytes());
    out.extend_from_slice(&(ck.params.params.len() as u32).to_le_bytes());
    for (p, m) in ck.params.params.iter().zip(&ck.state.momentum) {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for x in p.value.data().iter().chain(m.data()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.at))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn floats(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("tensor too large")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decodes a checkpoint for a model of shape `cfg`.
pub fn decode(bytes: &[u8], cfg: &ModelConfig) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let config_hash = r.u64()?;
    let step = r.u64()? as usize;
    let count = r.u32()? as usize;
    let mut named = Vec::with_capacity(count);
    let mut momentum = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "tensor name is not UTF-8")?
            .to_owned();
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        let value = Matrix::from_vec(rows, cols, r.floats(rows * cols)?).map_err(|e| e.to_string())?;
        let m = Matrix::from_vec(rows, cols, r.floats(rows * cols)?).map_err(|e| e.to_string())?;
        named.push((name, value));
        momentum.push(m);
    }
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    let params = ModelParams::from_named(cfg, named).map_err(|e| e.to_string())?;
    Ok(Checkpoint {
        config_hash,
        step,
        params,
        state: LarsState { momentum },
    })
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(ck)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path, cfg: &ModelConfig) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, cfg).map_err(|reason| Error::format(path, reason))
}
