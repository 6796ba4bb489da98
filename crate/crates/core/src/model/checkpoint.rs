//! Checkpoint archive.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  b"UVCKPT\0\0"
//! version    u32
//! meta_len   u32
//! meta       meta_len bytes of UTF-8 JSON (CheckpointMeta)
//! n_tensors  u32
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   ndim     u32, dims u32 × ndim
//!   data     f32 × prod(dims), row-major
//! ```
//!
//! Parameters are trained in f64 and stored as f32; a loaded checkpoint
//! saves back to identical bytes.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{ModelConfig, UniVersa};
use crate::error::{Error, Result};
use crate::train::NormalizationStats;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UVCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub model: ModelConfig,
    pub normalization: NormalizationStats,
    /// Tokenizer in its text form, so inference needs no side files.
    pub bpe: Option<String>,
    /// Free-form provenance (epoch, step, dev loss, ...).
    #[serde(default)]
    pub info: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: UniVersa,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated archive".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Checkpoint {
    pub fn new(model: UniVersa, normalization: NormalizationStats, bpe: Option<String>) -> Self {
        Checkpoint {
            meta: CheckpointMeta {
                format_version: FORMAT_VERSION,
                model: model.config().clone(),
                normalization,
                bpe,
                info: Default::default(),
            },
            model,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, FORMAT_VERSION as usize)?;
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        put_u32(&mut out, meta.len())?;
        out.extend_from_slice(&meta);
        let params = self.model.params();
        put_u32(&mut out, params.len())?;
        for (name, t) in params.iter() {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, 2)?;
            put_u32(&mut out, t.nrows())?;
            put_u32(&mut out, t.ncols())?;
            for &v in t.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        // seed is irrelevant: every tensor is overwritten below
        let mut model = UniVersa::new(meta.model.clone(), 0)?;
        let n = r.u32()? as usize;
        if n != model.params().len() {
            return Err(Error::Checkpoint(format!(
                "archive holds {n} tensors, configuration implies {}",
                model.params().len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|e| Error::Checkpoint(e.to_string()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let (rows, cols) = match dims[..] {
                [rows, cols] => (rows, cols),
                [len] => (1, len),
                _ => return Err(Error::Checkpoint(format!("tensor {name}: {ndim}-d unsupported"))),
            };
            let bytes = r.take(rows * cols * 4)?;
            let data: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let value = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))?;
            model.params_mut().assign(&name, value)?;
            if !seen.insert(name.clone()) {
                return Err(Error::Checkpoint(format!("tensor {name} stored twice")));
            }
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Checkpoint { meta, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    pub fn bpe(&self) -> Result<Option<crate::bpe::BpeModel>> {
        self.meta.bpe.as_deref().map(crate::bpe::BpeModel::from_text).transpose()
    }
}
