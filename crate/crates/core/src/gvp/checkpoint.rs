//! `S3FC` checkpoint files.
//!
//! Layout (little-endian): magic `S3FC`, version `u32`, `u32` length plus a
//! JSON metadata blob, `u32` tensor count, then per tensor: `u32` name
//! length, UTF-8 name, `u32` rank, `u32` dims, `f32` payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::Model;
use super::params::Params;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"S3FC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    /// Free-form state of whatever produced the checkpoint.
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Checkpoint {
            meta: CheckpointMeta { model: model.config.clone(), extra: serde_json::Value::Null },
            tensors: model.params.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    /// Model parameters are every tensor whose name has no `/`.
    pub fn to_model(&self) -> Result<Model> {
        let mut p = Params::new();
        for (n, t) in &self.tensors {
            if !n.contains('/') {
                p.insert(n.clone(), t.clone());
            }
        }
        Model::from_parts(self.meta.model.clone(), p)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        let meta = serde_json::to_vec(&self.meta)?;
        put_u32(&mut out, meta.len() as u32);
        out.extend_from_slice(&meta);
        put_u32(&mut out, self.tensors.len() as u32);
        for (name, t) in &self.tensors {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, 2);
            put_u32(&mut out, t.rows as u32);
            put_u32(&mut out, t.cols as u32);
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("checkpoint magic mismatch".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let dims: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
            let (rows, cols) = match dims.as_slice() {
                [] => (1, 1),
                [n] => (1, *n),
                [a, rest @ ..] => (*a, rest.iter().product()),
            };
            let payload = r.take(rows * cols * 4)?;
            let data: Vec<f64> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("non-finite value in tensor `{name}`")));
            }
            tensors.push((name, Tensor::from_vec(rows, cols, data)));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after the last tensor".into()));
        }
        Ok(Checkpoint { meta, tensors })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    std::fs::write(path, ck.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| e.in_file(path))
}
