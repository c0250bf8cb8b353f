//! Masked-residue pre-training on a synthetic motif corpus whose residue
//! types follow from the local bend angle.

use std::time::Instant;

use protfit::gvp::{Mode, Model, ModelConfig};
use protfit::surface::{build_surface, SurfaceConfig};
use protfit::toy::motif_corpus;
use protfit::training::{evaluate, TrainConfig, TrainItem, Trainer};

fn main() -> protfit::Result<()> {
    let mode: Mode = std::env::args().nth(1).as_deref().unwrap_or("s3f").parse()?;
    let t0 = Instant::now();
    let surface = SurfaceConfig::default();
    let items: Vec<TrainItem> = motif_corpus(20, 40, 7)
        .into_iter()
        .map(|p| {
            let cloud = mode.uses_surface().then(|| build_surface(&p, &surface)).transpose()?;
            Ok(TrainItem { protein: p, embedding: None, cloud })
        })
        .collect::<protfit::Result<_>>()?;
    println!("corpus ready in {:.1?}", t0.elapsed());

    let config = TrainConfig::desk();
    let model = Model::new(ModelConfig::desk().with_mode(mode), config.seed)?;
    let (l0, a0) = evaluate(&model, &items, &config.masking, 99, 0)?;
    println!("init: loss {l0:.3} acc {a0:.3}");
    let mut trainer = Trainer::new(model, config)?;
    trainer.fit(&items, |t| {
        let h = t.history.last().expect("one epoch done");
        println!("epoch {:>2}  loss {:.3}  acc {:.3}  ({:.1?})", h.epoch, h.loss, h.masked_acc, t0.elapsed());
        Ok(())
    })?;
    let (l1, a1) = evaluate(&trainer.model, &items, &trainer.config.masking, 99, 0)?;
    println!("final: loss {l1:.3} acc {a1:.3}, {:.0}% below ln 20", 100.0 * (1.0 - l1 / 20f64.ln()));
    Ok(())
}
