//! Frozen per-residue embeddings from an external language model, packed
//! into the binary format and looked up by masking pattern while scoring.
//! Scoring a variant needs the file computed with exactly its sites masked.

use protfit::cli::main_with_args;
use protfit::gvp::{EmbedderSpec, Mode, Model, ModelConfig};
use protfit::protein_io::{context_tag_for, load_embeddings};
use protfit::scoring::{score_variant, EmbeddingSource, EmbeddingStore};
use protfit::toy::{random_protein, random_variants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 8;

fn main() -> protfit::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let protein = random_protein("p", 24, &mut rng);
    let variants = random_variants(&protein, 5, 2, &mut rng);

    let mut store = EmbeddingStore::new();
    for (i, v) in variants.iter().enumerate() {
        if store.get(&context_tag_for(&v.positions())).is_some() {
            continue;
        }
        // stand-in for a language-model forward pass on the masked sequence
        let text: String = (0..protein.len())
            .map(|_| (0..DIM).map(|_| format!("{:.4}", rng.random_range(-1.0..1.0))).collect::<Vec<_>>().join(" ") + "\n")
            .collect();
        let matrix = dir.path().join(format!("v{i}.txt"));
        std::fs::write(&matrix, text).expect("write matrix");
        let out = dir.path().join(format!("v{i}.s3fe"));
        let mask = v.positions().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        let args = ["protfit", "embed-pack", matrix.to_str().unwrap(), "-o", out.to_str().unwrap(), "--mask", &mask];
        assert_eq!(main_with_args(args), 0);
        let e = load_embeddings(&out)?;
        assert_eq!(e.context_tag, context_tag_for(&v.positions()));
        store.insert(e)?;
    }

    let config = ModelConfig { embedder: EmbedderSpec::File { dim: DIM }, ..ModelConfig::desk().with_mode(Mode::S2f) };
    let model = Model::new(config, 0)?;
    for v in &variants {
        let s = score_variant(&model, &protein, v, EmbeddingSource::Store(&store), None)?;
        println!("{:<12} {s:+.4}", v.to_string_with_offset(protein.chain_offset));
    }
    Ok(())
}
