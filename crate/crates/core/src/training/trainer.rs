use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::masking::{apply_mask, MaskingPolicy};
use super::optim::{clip_grad_norm, Optimizer, OptimizerConfig};
use crate::error::{Error, Result};
use crate::gvp::{Checkpoint, EmbedderSpec, EmbeddingInput, ForwardInput, Mode, Model, Tensor};
use crate::protein_io::{parse_context_tag, Protein, ResidueEmbeddings};
use crate::residue::Residue;
use crate::surface::{verify_excision, SurfacePointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Global gradient norm cap.
    pub grad_clip: f64,
    pub masking: MaskingPolicy,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    /// Brute-force leakage recheck on every k-th step (0: never).
    pub leakage_check_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 8,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            grad_clip: 1.0,
            masking: MaskingPolicy::default(),
            checkpoint_every: 10,
            leakage_check_every: 0,
        }
    }
}

impl TrainConfig {
    /// Reference batch sizes: 128 for the structure-only model, 8 with a
    /// surface.
    pub fn for_mode(mode: Mode) -> Self {
        let batch_size = if mode == Mode::S2f { 128 } else { 8 };
        TrainConfig { batch_size, ..Default::default() }
    }

    /// Short schedule with a larger step size for small corpora.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 4,
            optimizer: OptimizerConfig { learning_rate: 3e-3, ..Default::default() },
            checkpoint_every: 10,
            leakage_check_every: 10,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("gradient clip norm must be positive".into()));
        }
        self.masking.validate()
    }
}

/// One corpus entry.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub protein: Protein,
    /// Precomputed embeddings (file embedder); their context tag fixes the
    /// selected positions.
    pub embedding: Option<ResidueEmbeddings>,
    /// Full surface cloud (surface modes).
    pub cloud: Option<SurfacePointCloud>,
}

impl TrainItem {
    pub fn new(protein: Protein) -> Self {
        TrainItem { protein, embedding: None, cloud: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Mean over proteins of the per-protein mean cross-entropy.
    pub loss: f64,
    pub correct: usize,
    pub total: usize,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: u64,
    pub loss: f64,
    pub masked_acc: f64,
}

struct ItemPass {
    loss: f64,
    grads: Vec<Tensor>,
    correct: usize,
    total: usize,
}

/// Check that every item carries what the model configuration needs.
pub fn check_items(model: &Model, items: &[TrainItem]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    let cfg = &model.config;
    for it in items {
        let id = &it.protein.id;
        match cfg.embedder {
            EmbedderSpec::File { dim } => {
                let e = it
                    .embedding
                    .as_ref()
                    .ok_or_else(|| Error::invalid(format!("{id}: file embedder but no embedding file")))?;
                if e.dim != dim || e.n_residues() != it.protein.len() {
                    return Err(Error::invalid(format!(
                        "{id}: embeddings are {} x {}, expected {} x {dim}",
                        e.n_residues(),
                        e.dim,
                        it.protein.len()
                    )));
                }
                let sel = parse_context_tag(&e.context_tag)?;
                if sel.is_empty() {
                    return Err(Error::invalid(format!("{id}: embeddings were produced without masked positions")));
                }
                if let Some(&p) = sel.iter().find(|&&p| p >= it.protein.len()) {
                    return Err(Error::invalid(format!("{id}: masked position {p} out of range")));
                }
            }
            EmbedderSpec::Toy { .. } => {}
        }
        if cfg.mode.uses_surface() {
            let c = it.cloud.as_ref().ok_or_else(|| Error::invalid(format!("{id}: mode {} needs a surface", cfg.mode)))?;
            if c.feature_dim != cfg.surface_feature_dim {
                return Err(Error::invalid(format!(
                    "{id}: surface features have width {}, model expects {}",
                    c.feature_dim, cfg.surface_feature_dim
                )));
            }
        }
    }
    Ok(())
}

fn argmax(row: &[f64]) -> usize {
    row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best })
}

/// Selected positions and embedder input for one item under one draw.
fn draw_input(model: &Model, item: &TrainItem, policy: &MaskingPolicy, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Option<Vec<u8>>)> {
    match (&model.config.embedder, &item.embedding) {
        (EmbedderSpec::File { .. }, Some(e)) => Ok((parse_context_tag(&e.context_tag)?, None)),
        (EmbedderSpec::File { .. }, None) => Err(Error::invalid("file embedder needs embeddings")),
        (EmbedderSpec::Toy { .. }, _) => {
            let d = apply_mask(&item.protein.sequence, rng, policy);
            Ok((d.selected, Some(d.tokens)))
        }
    }
}

fn item_pass(model: &Model, item: &TrainItem, policy: &MaskingPolicy, mut rng: ChaCha8Rng, check_leak: bool) -> Result<ItemPass> {
    let (selected, tokens) = draw_input(model, item, policy, &mut rng)?;
    let embedding = match (&tokens, &item.embedding) {
        (Some(t), _) => EmbeddingInput::Toy(t),
        (None, Some(e)) => EmbeddingInput::File(e),
        (None, None) => unreachable!("draw_input checked the embedder"),
    };
    if check_leak && model.config.mode.uses_surface() {
        let full = item.cloud.as_ref().ok_or_else(|| Error::invalid("surface mode needs a cloud"))?;
        let coords = &item.protein.ca_coords;
        let prepared = model.prepare_surface(full, coords, &selected)?;
        let sites: Vec<_> = selected.iter().map(|&i| coords[i]).collect();
        verify_excision(full, &prepared.cloud, &sites, model.config.excise_m)?;
    }
    let targets: Vec<Residue> = selected.iter().map(|&i| item.protein.sequence[i]).collect();
    let input = ForwardInput { protein: &item.protein, embedding, masked: &selected, cloud: item.cloud.as_ref() };
    let (loss, grads, lp) = model.loss_and_grads(&input, &targets)?;
    let correct = targets.iter().enumerate().filter(|(r, t)| argmax(lp.row(*r)) == t.index()).count();
    Ok(ItemPass { loss, grads, correct, total: targets.len() })
}

/// Mean masked cross-entropy and accuracy without updating, using the
/// masking streams of epoch `epoch`.
pub fn evaluate(model: &Model, items: &[TrainItem], policy: &MaskingPolicy, seed: u64, epoch: u64) -> Result<(f64, f64)> {
    let res: Vec<Result<(f64, usize, usize)>> = items
        .par_iter()
        .enumerate()
        .map(|(i, it)| {
            let mut rng = item_rng(seed, epoch, i);
            let (selected, tokens) = draw_input(model, it, policy, &mut rng)?;
            let embedding = match (&tokens, &it.embedding) {
                (Some(t), _) => EmbeddingInput::Toy(t),
                (None, Some(e)) => EmbeddingInput::File(e),
                (None, None) => unreachable!("draw_input checked the embedder"),
            };
            let input = ForwardInput { protein: &it.protein, embedding, masked: &selected, cloud: it.cloud.as_ref() };
            let lp = model.forward_logits(&input)?;
            let mut loss = 0.0;
            let mut correct = 0;
            for (r, &p) in selected.iter().enumerate() {
                let t = it.protein.sequence[p].index();
                loss -= lp.get(r, t);
                correct += usize::from(argmax(lp.row(r)) == t);
            }
            Ok((loss / selected.len() as f64, correct, selected.len()))
        })
        .collect();
    let (mut loss, mut correct, mut total) = (0.0, 0, 0);
    for r in res {
        let (l, c, t) = r?;
        loss += l;
        correct += c;
        total += t;
    }
    Ok((loss / items.len() as f64, correct as f64 / total as f64))
}

/// Masking stream of corpus entry `idx` in `epoch`.
pub fn item_rng(seed: u64, epoch: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((epoch << 32) | idx as u64);
    rng
}

/// Visiting order of the corpus in `epoch`.
pub fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Model plus optimizer state and the position in the schedule.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub optimizer: Optimizer,
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochStats>,
}

impl Trainer {
    /// Parameters are rounded to `f32` up front so that a saved and
    /// reloaded trainer continues bit-identically.
    pub fn new(mut model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.masking.excise_m != model.config.excise_m {
            return Err(Error::Config(format!(
                "masking excises {} points, model excises {}",
                config.masking.excise_m, model.config.excise_m
            )));
        }
        model.params.round_to_f32();
        let optimizer = Optimizer::new(config.optimizer, &model.params);
        Ok(Trainer { model, optimizer, config, epoch: 0, history: Vec::new() })
    }

    /// One optimizer step on `batch` (indices into `items`) with the
    /// masking streams of the current epoch.
    pub fn pretrain_step(&mut self, items: &[TrainItem], batch: &[usize]) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let epoch = self.epoch as u64;
        let check = self.config.leakage_check_every > 0
            && (self.optimizer.step % self.config.leakage_check_every as u64) == 0;
        let model = &self.model;
        let policy = &self.config.masking;
        let seed = self.config.seed;
        let passes: Vec<Result<ItemPass>> = batch
            .par_iter()
            .map(|&i| item_pass(model, &items[i], policy, item_rng(seed, epoch, i), check))
            .collect();
        let mut grads: Option<Vec<Tensor>> = None;
        let (mut loss, mut correct, mut total) = (0.0, 0, 0);
        for (pass, &i) in passes.into_iter().zip(batch) {
            let p = pass.map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("epoch {}, step {}, protein {}: {m}", self.epoch, self.optimizer.step, items[i].protein.id)),
                e => e,
            })?;
            loss += p.loss;
            correct += p.correct;
            total += p.total;
            match &mut grads {
                None => grads = Some(p.grads),
                Some(acc) => acc.iter_mut().zip(&p.grads).for_each(|(a, g)| a.add_assign(g)),
            }
        }
        let mut grads = grads.expect("nonempty batch");
        let scale = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|v| *v *= scale));
        let grad_norm = clip_grad_norm(&mut grads, self.config.grad_clip);
        if !grad_norm.is_finite() {
            return Err(Error::Numerical(format!("non-finite gradient norm at step {}", self.optimizer.step)));
        }
        self.optimizer.update(&mut self.model.params, &grads)?;
        self.model.params.round_to_f32();
        self.optimizer.round_to_f32();
        Ok(StepStats { loss: loss * scale, correct, total, grad_norm })
    }

    /// One shuffled pass over `items`.
    pub fn run_epoch(&mut self, items: &[TrainItem]) -> Result<EpochStats> {
        let order = epoch_order(self.config.seed, self.epoch as u64, items.len());
        let (mut loss, mut correct, mut total, mut n) = (0.0, 0, 0, 0);
        for batch in order.chunks(self.config.batch_size) {
            let s = self.pretrain_step(items, batch)?;
            loss += s.loss * batch.len() as f64;
            correct += s.correct;
            total += s.total;
            n += batch.len();
        }
        self.epoch += 1;
        let stats = EpochStats {
            epoch: self.epoch,
            step: self.optimizer.step,
            loss: loss / n as f64,
            masked_acc: correct as f64 / total as f64,
        };
        self.history.push(stats);
        Ok(stats)
    }

    /// Run the remaining epochs, calling `after_epoch` after each one.
    pub fn fit(&mut self, items: &[TrainItem], mut after_epoch: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        check_items(&self.model, items)?;
        while self.epoch < self.config.epochs {
            self.run_epoch(items)?;
            after_epoch(self)?;
        }
        Ok(())
    }

    /// Model tensors plus `adam.m/<name>` and `adam.v/<name>` moments; the
    /// schedule position and history go in the metadata.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_model(&self.model);
        for (prefix, moments) in [("adam.m", &self.optimizer.m), ("adam.v", &self.optimizer.v)] {
            for (name, t) in self.model.params.names().iter().zip(moments) {
                ck.tensors.push((format!("{prefix}/{name}"), t.clone()));
            }
        }
        ck.meta.extra = serde_json::json!({
            "train": self.config,
            "epoch": self.epoch,
            "step": self.optimizer.step,
            "history": self.history,
        });
        ck
    }

    /// Continue from a checkpoint written by [`Trainer::checkpoint`];
    /// `config` replaces the stored schedule (for instance to add epochs).
    pub fn resume(ck: &Checkpoint, config: TrainConfig) -> Result<Self> {
        let model = ck.to_model()?;
        let mut t = Trainer::new(model, config)?;
        let extra = &ck.meta.extra;
        t.epoch = extra.get("epoch").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        t.optimizer.step = extra.get("step").and_then(|v| v.as_u64()).unwrap_or(0);
        if let Some(h) = extra.get("history") {
            t.history = serde_json::from_value(h.clone())?;
        }
        let names = t.model.params.names().to_vec();
        for (prefix, slot) in [("adam.m", &mut t.optimizer.m), ("adam.v", &mut t.optimizer.v)] {
            for (name, dst) in names.iter().zip(slot.iter_mut()) {
                if let Some(src) = ck.tensor(&format!("{prefix}/{name}")) {
                    if src.shape() != dst.shape() {
                        return Err(Error::Format(format!("moment `{prefix}/{name}` has the wrong shape")));
                    }
                    *dst = src.clone();
                } else if t.optimizer.step > 0 {
                    return Err(Error::Format(format!("checkpoint lacks optimizer moment `{prefix}/{name}`")));
                }
            }
        }
        Ok(t)
    }
}
