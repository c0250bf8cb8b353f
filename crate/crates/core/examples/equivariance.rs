//! Rigid motions of the input leave predictions unchanged and rotate every
//! vector channel.

use protfit::geometry::{mat_vec, random_rotation};
use protfit::gvp::{masked_tokens, EmbeddingInput, ForwardInput, Mode, Model, ModelConfig, Tensor};
use protfit::surface::{build_surface, SurfaceConfig};
use protfit::toy::random_protein;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rotated(v: &Tensor, rot: &[[f64; 3]; 3]) -> Tensor {
    let mut out = v.clone();
    for i in 0..v.rows / 3 {
        for c in 0..v.cols {
            let x = mat_vec(rot, [v.get(3 * i, c), v.get(3 * i + 1, c), v.get(3 * i + 2, c)]);
            for (k, xk) in x.into_iter().enumerate() {
                out.set(3 * i + k, c, xk);
            }
        }
    }
    out
}

fn main() -> protfit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let protein = random_protein("p", 30, &mut rng);
    let cloud = build_surface(&protein, &SurfaceConfig::default())?;
    let masked = [4, 11, 20];
    let tokens = masked_tokens(&protein.sequence, &masked);

    for mode in [Mode::S2f, Mode::S3f, Mode::SurfOnly] {
        let model = Model::new(ModelConfig::desk().with_mode(mode), 7)?;
        let rot = random_rotation(&mut rng);
        let shift = [0, 1, 2].map(|_| rng.random_range(-25.0..25.0));
        let (p2, c2) = (protein.transformed(&rot, shift), cloud.transformed(&rot, shift));
        let input = |p, c| ForwardInput { protein: p, embedding: EmbeddingInput::Toy(&tokens), masked: &masked, cloud: c };
        let surf = mode.uses_surface();
        let a = model.forward_trace(&input(&protein, surf.then_some(&cloud)))?;
        let b = model.forward_trace(&input(&p2, surf.then_some(&c2)))?;
        println!(
            "{mode:>9}: log-prob change {:.1e}, vector channel change after rotating back {:.1e}",
            a.log_probs.max_abs_diff(&b.log_probs),
            rotated(&a.residue.v, &rot).max_abs_diff(&b.residue.v)
        );
    }
    Ok(())
}
