//! Zero-shot variant scoring with confidence gating and z-score ensembling.
//!
//! Scores a random assay on a structure whose first ten residues have low
//! confidence. Variants touching them fall back to a baseline score list.

use std::collections::HashMap;

use protfit::gvp::{Mode, Model, ModelConfig};
use protfit::protein_io::{parse_assay, Protein};
use protfit::scoring::{ensemble_zscores, score_assay, EmbeddingSource, GatingOptions};
use protfit::surface::{build_surface, SurfaceConfig};
use protfit::toy::{assay_csv, random_protein, random_variants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> protfit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = random_protein("target", 50, &mut rng);
    let plddt: Vec<f64> = (0..base.len()).map(|i| if i < 10 { 55.0 } else { 92.0 }).collect();
    let protein = Protein::new(base.id.clone(), base.sequence.clone(), base.ca_coords.clone(), Some(plddt))?;

    let variants = random_variants(&protein, 40, 2, &mut rng);
    let mut csv = assay_csv(&protein, &variants, &vec![0.0; variants.len()]);
    csv.push_str("WT,0.0,0\n");
    let assay = parse_assay(csv.as_bytes(), "target")?;
    let baseline: HashMap<String, f64> = assay.mutants().iter().map(|m| (m.to_string(), rng.random_range(-3.0..0.0))).collect();

    let model = Model::new(ModelConfig::desk().with_mode(Mode::S3f), 0)?;
    let cloud = build_surface(&protein, &SurfaceConfig::default())?;
    let gating = GatingOptions::default();
    let scores = score_assay(&model, &protein, &assay, EmbeddingSource::Toy, Some(&cloud), Some(&baseline), &gating)?;

    let external: Vec<f64> = scores.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let model_scores: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let ensemble = ensemble_zscores(&model_scores, &external)?;

    println!("{:<16} {:>9} {:>9}  provenance", "mutant", "score", "ensemble");
    for (s, e) in scores.iter().zip(&ensemble).take(12) {
        println!("{:<16} {:>+9.4} {:>+9.4}  {}", s.mutant, s.score, e, s.provenance.as_str());
    }
    let wt = scores.iter().find(|s| s.mutant == "WT").expect("WT row");
    println!("...\nwild type scores {}", wt.score);
    Ok(())
}
