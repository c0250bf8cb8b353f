//! Zero-shot variant scoring by masked log-odds, confidence gating against
//! a baseline, and z-score ensembling.

mod ensemble;
mod output;
mod score;
mod store;

pub use ensemble::{ensemble_zscores, zscores};
pub use output::{parse_scores_csv, write_scores_csv, ScoreRow};
pub use score::{log_odds, score_assay, score_variant, site_terms, GatingOptions, Provenance, VariantScore};
pub use store::{EmbeddingSource, EmbeddingStore};
