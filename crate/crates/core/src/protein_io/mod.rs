//! Ingestion of structures, assay tables, mutation strings, residue
//! embeddings and external score files.

mod embeddings;
mod mutation;
mod structure;
mod tables;

pub use embeddings::{
    context_tag_for, load_embeddings, parse_context_tag, read_embeddings, save_embeddings, write_embeddings,
    ResidueEmbeddings, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use mutation::{is_wild_type_string, parse_mutation, parse_mutation_unchecked, MutationSet, Site};
pub use structure::{load_structure, parse_structure, write_tsv, Protein, StructureFormat};
pub use tables::{
    load_assay, load_external_scores, parse_assay, parse_external_scores, AssayTable, AssayVariant,
};
