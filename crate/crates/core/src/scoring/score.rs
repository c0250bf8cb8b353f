use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::store::{prepare, EmbeddingSource};
use crate::error::{Error, Result};
use crate::gvp::{ForwardInput, Model};
use crate::protein_io::{parse_mutation, AssayTable, MutationSet, Protein};
use crate::residue::Residue;
use crate::surface::SurfacePointCloud;

/// Where a variant's score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Model,
    Baseline,
    /// Model terms for confident sites plus baseline terms for the rest.
    Mixed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Model => "model",
            Provenance::Baseline => "baseline",
            Provenance::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Provenance::Model),
            "baseline" => Ok(Provenance::Baseline),
            "mixed" => Ok(Provenance::Mixed),
            other => Err(Error::Format(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub mutant: String,
    pub score: f64,
    pub provenance: Provenance,
}

/// `log p(mt) - log p(wt)` from one row of log-probabilities.
pub fn log_odds(log_probs: &[f64], wt: Residue, mt: Residue) -> f64 {
    log_probs[mt.index()] - log_probs[wt.index()]
}

/// Per-site log-odds terms of `set`, all read from one forward pass that
/// masks every mutated site jointly and excises the union of their surface
/// neighborhoods.
pub fn site_terms(
    model: &Model,
    protein: &Protein,
    set: &MutationSet,
    src: EmbeddingSource,
    cloud: Option<&SurfacePointCloud>,
) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Ok(Vec::new());
    }
    set.check_against(protein)?;
    let masked = set.positions();
    let prepared = prepare(model, src, &protein.sequence, &masked)?;
    let input = ForwardInput { protein, embedding: prepared.as_input(), masked: &masked, cloud };
    let lp = model.forward_logits(&input)?;
    let terms: Vec<f64> = set.sites().iter().enumerate().map(|(r, s)| log_odds(lp.row(r), s.wt, s.mt)).collect();
    if let Some(t) = terms.iter().find(|t| !t.is_finite()) {
        return Err(Error::Numerical(format!("non-finite log-odds {t} for {set}")));
    }
    Ok(terms)
}

/// Sum of the per-site log-odds; exactly 0 for the wild type.
pub fn score_variant(
    model: &Model,
    protein: &Protein,
    set: &MutationSet,
    src: EmbeddingSource,
    cloud: Option<&SurfacePointCloud>,
) -> Result<f64> {
    Ok(site_terms(model, protein, set, src, cloud)?.iter().fold(0.0, |a, t| a + t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatingOptions {
    /// Sites with confidence below this use the baseline.
    pub plddt_threshold: f64,
    /// Score variants that straddle the threshold site by site instead of
    /// falling back to the baseline for the whole variant.
    pub per_site: bool,
}

impl Default for GatingOptions {
    fn default() -> Self {
        GatingOptions { plddt_threshold: 70.0, per_site: false }
    }
}

/// Baseline score of `key`, or a data error naming it.
fn baseline_of(baseline: &HashMap<String, f64>, key: &str) -> Result<f64> {
    baseline
        .get(key)
        .copied()
        .ok_or_else(|| Error::invalid(format!("baseline has no score for `{key}`")))
}

fn score_one(
    model: &Model,
    protein: &Protein,
    text: &str,
    set: &MutationSet,
    src: EmbeddingSource,
    cloud: Option<&SurfacePointCloud>,
    baseline: Option<&HashMap<String, f64>>,
    gating: &GatingOptions,
) -> Result<VariantScore> {
    let low: Vec<bool> = set.sites().iter().map(|s| protein.plddt[s.position] < gating.plddt_threshold).collect();
    let n_low = low.iter().filter(|&&l| l).count();
    let out = |score, provenance| Ok(VariantScore { mutant: text.to_string(), score, provenance });
    if n_low == 0 {
        return out(score_variant(model, protein, set, src, cloud)?, Provenance::Model);
    }
    let baseline = baseline.ok_or_else(|| Error::Config("low-confidence sites need a baseline".into()))?;
    if n_low == set.len() || !gating.per_site {
        return out(baseline_of(baseline, text)?, Provenance::Baseline);
    }
    let terms = site_terms(model, protein, set, src, cloud)?;
    let mut score = 0.0;
    for ((site, term), is_low) in set.sites().iter().zip(terms).zip(low) {
        score += if is_low {
            let single = MutationSet::new(vec![*site])?.to_string_with_offset(protein.chain_offset);
            baseline_of(baseline, &single)?
        } else {
            term
        };
    }
    out(score, Provenance::Mixed)
}

/// Score every assay variant, in assay order. A variant whose sites all
/// have confidence at or above the threshold gets the model score; any
/// low-confidence site routes it to the baseline (or, with per-site
/// gating, mixes baseline terms for the low sites into the model sum).
pub fn score_assay(
    model: &Model,
    protein: &Protein,
    assay: &AssayTable,
    src: EmbeddingSource,
    cloud: Option<&SurfacePointCloud>,
    baseline: Option<&HashMap<String, f64>>,
    gating: &GatingOptions,
) -> Result<Vec<VariantScore>> {
    let sets: Vec<MutationSet> = assay
        .variants
        .iter()
        .map(|v| parse_mutation(&v.mutant, protein))
        .collect::<Result<_>>()?;
    let needs_baseline = sets
        .iter()
        .flat_map(|s| s.sites())
        .any(|s| protein.plddt[s.position] < gating.plddt_threshold);
    if needs_baseline && baseline.is_none() {
        return Err(Error::Config(format!(
            "assay has sites with pLDDT below {}; a baseline score file is required",
            gating.plddt_threshold
        )));
    }
    assay
        .variants
        .par_iter()
        .zip(sets.par_iter())
        .map(|(v, set)| score_one(model, protein, &v.mutant, set, src, cloud, baseline, gating))
        .collect()
}
