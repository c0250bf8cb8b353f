use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trainer::{EpochStats, TrainConfig, TrainItem, Trainer};
use crate::error::{Error, Result};
use crate::gvp::{load_checkpoint, save_checkpoint, EmbedderSpec, Model, ModelConfig};
use crate::protein_io::{load_embeddings, load_structure};
use crate::surface::{build_surface, read_cloud, SurfaceConfig};

/// Extension of surface dumps placed next to corpus structures.
pub const CLOUD_EXTENSION: &str = "surf";
pub const EMBEDDING_EXTENSION: &str = "s3fe";

fn is_structure(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("pdb" | "ent" | "tsv")
    )
}

/// Load every structure in `dir`, pairing `<stem>.s3fe` embeddings and
/// `<stem>.surf` surface dumps by file stem. Surface modes generate missing
/// clouds with `surface`.
pub fn load_corpus(dir: &Path, model: &ModelConfig, surface: &SurfaceConfig) -> Result<Vec<TrainItem>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_stem: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_structure(&path) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if let Some(prev) = by_stem.insert(stem.clone(), path.clone()) {
                return Err(Error::invalid(format!(
                    "two structures share the stem `{stem}`: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    if by_stem.is_empty() {
        return Err(Error::invalid(format!("no structures in {}", dir.display())));
    }
    let mut items = Vec::with_capacity(by_stem.len());
    for (stem, path) in by_stem {
        let protein = load_structure(&path, None)?;
        let emb_path = dir.join(format!("{stem}.{EMBEDDING_EXTENSION}"));
        let embedding = match (model.embedder, emb_path.exists()) {
            (EmbedderSpec::File { .. }, true) => Some(load_embeddings(&emb_path)?),
            (EmbedderSpec::File { .. }, false) => {
                return Err(Error::invalid(format!("{}: no matching embedding file", path.display())))
            }
            (EmbedderSpec::Toy { .. }, _) => None,
        };
        let cloud = if model.mode.uses_surface() {
            let cloud_path = dir.join(format!("{stem}.{CLOUD_EXTENSION}"));
            Some(if cloud_path.exists() {
                read_cloud(&cloud_path)?
            } else {
                build_surface(&protein, surface).map_err(|e| e.in_file(&path))?
            })
        } else {
            None
        };
        items.push(TrainItem { protein, embedding, cloud });
    }
    Ok(items)
}

/// Loss log CSV: a `# config_hash=` line, then `epoch,step,loss,masked_acc`.
pub fn loss_log_csv(history: &[EpochStats], config_hash: &str) -> String {
    let mut s = format!("# config_hash={config_hash}\nepoch,step,loss,masked_acc\n");
    for h in history {
        writeln!(s, "{},{},{:?},{:?}", h.epoch, h.step, h.loss, h.masked_acc).expect("write to string");
    }
    s
}

pub fn parse_loss_log(text: &str) -> Result<Vec<EpochStats>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let bad = |i: usize| Error::Format(format!("loss log: bad field `{}`", num(i)));
        out.push(EpochStats {
            epoch: num(0).parse().map_err(|_| bad(0))?,
            step: num(1).parse().map_err(|_| bad(1))?,
            loss: num(2).parse().map_err(|_| bad(2))?,
            masked_acc: num(3).parse().map_err(|_| bad(3))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PretrainOptions {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub surface: SurfaceConfig,
    pub out_dir: PathBuf,
    /// Continue from this checkpoint instead of a fresh initialization.
    pub resume: Option<PathBuf>,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub final_checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub history: Vec<EpochStats>,
    pub trainer: Trainer,
}

pub fn checkpoint_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join(format!("epoch_{epoch:04}.s3fc"))
}

/// Train on a corpus directory. Writes `epoch_NNNN.s3fc` every
/// `checkpoint_every` epochs, `final.s3fc`, and `loss_log.csv` under
/// `out_dir`.
pub fn pretrain(corpus: &Path, opts: &PretrainOptions) -> Result<PretrainOutput> {
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let mut trainer = match &opts.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.meta.model != opts.model {
                return Err(Error::Config(format!("{}: model configuration differs from the requested one", path.display())));
            }
            Trainer::resume(&ck, opts.train.clone())?
        }
        None => Trainer::new(Model::new(opts.model.clone(), opts.train.seed)?, opts.train.clone())?,
    };
    let items = load_corpus(corpus, &opts.model, &opts.surface)?;
    let every = opts.train.checkpoint_every;
    let out_dir = opts.out_dir.clone();
    trainer.fit(&items, |t| {
        if every > 0 && t.epoch % every == 0 {
            save_checkpoint(&checkpoint_path(&out_dir, t.epoch), &t.checkpoint())?;
        }
        Ok(())
    })?;
    let final_checkpoint = opts.out_dir.join("final.s3fc");
    save_checkpoint(&final_checkpoint, &trainer.checkpoint())?;
    let loss_log = opts.out_dir.join("loss_log.csv");
    std::fs::write(&loss_log, loss_log_csv(&trainer.history, &opts.config_hash)).map_err(|e| Error::io(&loss_log, e))?;
    Ok(PretrainOutput { final_checkpoint, loss_log, history: trainer.history.clone(), trainer })
}
