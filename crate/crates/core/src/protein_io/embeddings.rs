//! `S3FE` residue-embedding files.
//!
//! Layout (little-endian): magic `S3FE`, version `u32`, `n_r` `u32`, `dim`
//! `u32`, then `n_r * dim` `f32` values row-major. Any trailing bytes are a
//! UTF-8 context tag naming the positions that were masked when the
//! embeddings were produced.

use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"S3FE";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Per-residue embedding matrix plus the masking context it was produced in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueEmbeddings {
    pub dim: usize,
    /// `n_r * dim` values, row-major.
    pub rows: Vec<f32>,
    pub context_tag: String,
}

impl ResidueEmbeddings {
    pub fn new(dim: usize, rows: Vec<f32>, context_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if rows.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values do not form rows of width {dim}",
                rows.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite embedding value"));
        }
        Ok(ResidueEmbeddings { dim, rows, context_tag: context_tag.into() })
    }

    pub fn n_residues(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

/// Canonical context tag for a set of masked 0-based positions. The empty
/// set maps to the empty tag.
pub fn context_tag_for(masked: &[usize]) -> String {
    if masked.is_empty() {
        return String::new();
    }
    let mut m = masked.to_vec();
    m.sort_unstable();
    m.dedup();
    let list: Vec<String> = m.iter().map(|p| p.to_string()).collect();
    format!("mask={}", list.join(","))
}

/// Inverse of [`context_tag_for`].
pub fn parse_context_tag(tag: &str) -> Result<Vec<usize>> {
    let tag = tag.trim();
    if tag.is_empty() {
        return Ok(Vec::new());
    }
    let list = tag
        .strip_prefix("mask=")
        .ok_or_else(|| Error::Format(format!("context tag `{tag}` does not start with `mask=`")))?;
    let mut out: Vec<usize> = list
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Format(format!("bad position `{p}` in context tag"))))
        .collect::<Result<_>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn write_embeddings(e: &ResidueEmbeddings) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + e.rows.len() * 4 + e.context_tag.len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(e.n_residues() as u32).to_le_bytes());
    out.extend_from_slice(&(e.dim as u32).to_le_bytes());
    for v in &e.rows {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(e.context_tag.as_bytes());
    out
}

pub fn read_embeddings(bytes: &[u8]) -> Result<ResidueEmbeddings> {
    if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::Format("embedding file: magic mismatch (expected S3FE)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("embedding file: truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != EMBEDDING_VERSION {
        return Err(Error::Format(format!("embedding file: unsupported version {version}")));
    }
    let n_r = word(8) as usize;
    let dim = word(12) as usize;
    let payload = n_r
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("embedding file: payload size mismatch".into()))?;
    if dim == 0 || bytes.len() < HEADER_LEN + payload {
        return Err(Error::Format(format!(
            "embedding file: payload size mismatch (declared {n_r}x{dim}, {} payload bytes)",
            bytes.len() - HEADER_LEN
        )));
    }
    let rows: Vec<f32> = bytes[HEADER_LEN..HEADER_LEN + payload]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("embedding file: non-finite value".into()));
    }
    let context_tag = std::str::from_utf8(&bytes[HEADER_LEN + payload..])
        .map_err(|_| Error::Format("embedding file: footer is not UTF-8".into()))?
        .to_string();
    Ok(ResidueEmbeddings { dim, rows, context_tag })
}

pub fn load_embeddings(path: &Path) -> Result<ResidueEmbeddings> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(&bytes).map_err(|e| e.in_file(path))
}

pub fn save_embeddings(path: &Path, e: &ResidueEmbeddings) -> Result<()> {
    std::fs::write(path, write_embeddings(e)).map_err(|err| Error::io(path, err))
}
