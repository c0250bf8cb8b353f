use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gvp::{masked_tokens, EmbedderSpec, EmbeddingInput, Model};
use crate::protein_io::{context_tag_for, load_embeddings, ResidueEmbeddings};
use crate::residue::Residue;

/// Precomputed embeddings of one protein, one per masking pattern, keyed by
/// context tag.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    by_tag: HashMap<String, ResidueEmbeddings>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, e: ResidueEmbeddings) -> Result<()> {
        let tag = e.context_tag.clone();
        if self.by_tag.insert(tag.clone(), e).is_some() {
            return Err(Error::invalid(format!("two embedding files share the context tag `{tag}`")));
        }
        Ok(())
    }

    /// Every `.s3fe` file in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "s3fe"))
            .collect();
        paths.sort();
        let mut store = Self::new();
        for p in paths {
            store.insert(load_embeddings(&p)?).map_err(|e| e.in_file(&p))?;
        }
        Ok(store)
    }

    pub fn get(&self, tag: &str) -> Option<&ResidueEmbeddings> {
        self.by_tag.get(tag)
    }

    pub fn len(&self) -> usize {
        self.by_tag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tag.is_empty()
    }
}

/// Where the embedder input of a masking pattern comes from.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    /// Toy embedder: the sequence with the pattern replaced by the mask token.
    Toy,
    /// Embeddings produced upstream, looked up by context tag.
    Store(&'a EmbeddingStore),
}

/// Owned embedder input for one masking pattern.
#[derive(Debug, Clone)]
pub(crate) enum PreparedInput<'a> {
    Tokens(Vec<u8>),
    File(&'a ResidueEmbeddings),
}

impl PreparedInput<'_> {
    pub(crate) fn as_input(&self) -> EmbeddingInput<'_> {
        match self {
            PreparedInput::Tokens(t) => EmbeddingInput::Toy(t),
            PreparedInput::File(e) => EmbeddingInput::File(e),
        }
    }
}

pub(crate) fn prepare<'a>(model: &Model, src: EmbeddingSource<'a>, sequence: &[Residue], masked: &[usize]) -> Result<PreparedInput<'a>> {
    match (model.config.embedder, src) {
        (EmbedderSpec::Toy { .. }, EmbeddingSource::Toy) => Ok(PreparedInput::Tokens(masked_tokens(sequence, masked))),
        (EmbedderSpec::File { .. }, EmbeddingSource::Store(store)) => {
            let tag = context_tag_for(masked);
            store
                .get(&tag)
                .map(PreparedInput::File)
                .ok_or_else(|| Error::invalid(format!("no embeddings with context tag `{tag}`")))
        }
        _ => Err(Error::Config("embedding source does not match the model's embedder".into())),
    }
}
