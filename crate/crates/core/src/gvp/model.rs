use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EmbedderSpec, ModelConfig};
use super::layers::{affine, encoder, gvp, mlp, neighbor_mean, Ctx, GraphVars, StateVars};
use super::params::{init_params, Params};
use super::tape::Segments;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph_with, build_radius_graph_with, cross_knn, RbfConfig, SpatialGraph, Vec3};
use crate::protein_io::{context_tag_for, Protein, ResidueEmbeddings};
use crate::residue::{Residue, MASK_TOKEN, NUM_RESIDUE_TYPES};
use crate::surface::{excise_near_residue, ExcisionMap, SurfacePointCloud};

/// Half-width of the toy embedder's sequence window.
pub const TOY_WINDOW: usize = 2;

/// Per-node scalar (`n x d`) and vector (`3n x d'`) features.
#[derive(Debug, Clone, PartialEq)]
pub struct GvpState {
    pub s: Tensor,
    pub v: Tensor,
}

impl GvpState {
    pub fn zeros(n: usize, d: usize, dv: usize) -> Self {
        GvpState { s: Tensor::zeros(n, d), v: Tensor::zeros(3 * n, dv) }
    }

    pub fn n_nodes(&self) -> usize {
        self.s.rows
    }

    /// Vector channel `c` of node `i`.
    pub fn vector(&self, i: usize, c: usize) -> Vec3 {
        [self.v.get(3 * i, c), self.v.get(3 * i + 1, c), self.v.get(3 * i + 2, c)]
    }

    fn record(&self, ctx: &mut Ctx) -> StateVars {
        StateVars { s: ctx.constant(self.s.clone()), v: ctx.constant(self.v.clone()) }
    }

    fn read(ctx: &Ctx, h: StateVars) -> Self {
        GvpState { s: ctx.value(h.s).clone(), v: ctx.value(h.v).clone() }
    }
}

/// Residue-level input features.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingInput<'a> {
    /// Precomputed embeddings; their context tag must name the masked set.
    File(&'a ResidueEmbeddings),
    /// Token per residue for the toy embedder, `MASK_TOKEN` for masked.
    Toy(&'a [u8]),
}

/// Everything one forward pass reads.
#[derive(Debug, Clone, Copy)]
pub struct ForwardInput<'a> {
    pub protein: &'a Protein,
    pub embedding: EmbeddingInput<'a>,
    /// Positions whose residue types are predicted.
    pub masked: &'a [usize],
    /// Full surface of the protein; points near masked residues are
    /// removed before use. Required by the surface modes.
    pub cloud: Option<&'a SurfacePointCloud>,
}

/// Surface cloud after excision, with its graph and residue mappings.
#[derive(Debug, Clone)]
pub struct SurfaceInputs {
    pub cloud: SurfacePointCloud,
    pub excision: ExcisionMap,
    pub graph: SpatialGraph,
}

/// Final states of each track plus the log-probabilities at the masked rows.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub structure: Option<GvpState>,
    pub surface: Option<GvpState>,
    pub residue: GvpState,
    pub log_probs: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
}

struct Recorded {
    structure: Option<StateVars>,
    surface: Option<StateVars>,
    residue: StateVars,
    log_probs: super::tape::Var,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Model { config, params })
    }

    /// Wrap existing parameters after checking names and shapes.
    pub fn from_parts(config: ModelConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let expected = init_params(&config, &mut ChaCha8Rng::seed_from_u64(0));
        for (name, t) in expected.iter() {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => {
                    return Err(Error::Format(format!(
                        "parameter `{name}` has shape {:?}, expected {:?}",
                        p.shape(),
                        t.shape()
                    )))
                }
                None => return Err(Error::Format(format!("missing parameter `{name}`"))),
            }
        }
        if params.len() != expected.len() {
            return Err(Error::Format(format!(
                "{} parameter tensors, configuration expects {}",
                params.len(),
                expected.len()
            )));
        }
        // keep the canonical order
        let params = expected.names().iter().fold(Params::new(), |mut acc, n| {
            acc.insert(n.clone(), params.get(n).expect("checked").clone());
            acc
        });
        Ok(Model { config, params })
    }

    pub fn rbf(&self) -> RbfConfig {
        RbfConfig::evenly_spaced(self.config.rbf_kernels, 0.0, self.config.rbf_max).expect("validated")
    }

    pub fn structure_graph(&self, coords: &[Vec3]) -> SpatialGraph {
        build_radius_graph_with(coords, self.config.radius, &self.rbf())
    }

    /// Surface kNN graph; the neighbor count shrinks on clouds smaller than
    /// `surface_knn + 1`.
    pub fn surface_graph(&self, points: &[Vec3]) -> Result<SpatialGraph> {
        if points.len() < 2 {
            return Err(Error::invalid("surface graph needs at least 2 points"));
        }
        let k = self.config.surface_knn.min(points.len() - 1);
        build_knn_graph_with(points, k, &self.rbf())
    }

    /// Excise around `masked` and build the surface graph.
    pub fn prepare_surface(&self, cloud: &SurfacePointCloud, coords: &[Vec3], masked: &[usize]) -> Result<SurfaceInputs> {
        if cloud.feature_dim != self.config.surface_feature_dim {
            return Err(Error::invalid(format!(
                "surface features have width {}, model expects {}",
                cloud.feature_dim, self.config.surface_feature_dim
            )));
        }
        let (cloud, excision) = if masked.is_empty() {
            let all = (0..cloud.len()).collect();
            (cloud.clone(), ExcisionMap { kept: all, removed: Vec::new() })
        } else {
            let sites: Vec<Vec3> = masked.iter().map(|&i| coords[i]).collect();
            excise_near_residue(cloud, &sites, self.config.excise_m)?
        };
        let graph = self.surface_graph(&cloud.points)?;
        Ok(SurfaceInputs { cloud, excision, graph })
    }

    /// Adapter output `h0` scalars for every residue (`n x d`).
    fn embed(&self, ctx: &mut Ctx, emb: EmbeddingInput, n: usize, masked: &[usize]) -> Result<super::tape::Var> {
        let x = match (self.config.embedder, emb) {
            (EmbedderSpec::File { dim }, EmbeddingInput::File(e)) => {
                if e.dim != dim {
                    return Err(Error::invalid(format!("embeddings have width {}, model expects {dim}", e.dim)));
                }
                if e.n_residues() != n {
                    return Err(Error::invalid(format!(
                        "embeddings cover {} residues, protein has {n}",
                        e.n_residues()
                    )));
                }
                let tag = context_tag_for(masked);
                if e.context_tag != tag {
                    return Err(Error::invalid(format!(
                        "context tag mismatch: embeddings were produced with `{}`, forward pass masks `{tag}`",
                        e.context_tag
                    )));
                }
                ctx.constant(Tensor::from_vec(n, dim, e.rows.iter().map(|&v| v as f64).collect()))
            }
            (EmbedderSpec::Toy { .. }, EmbeddingInput::Toy(tokens)) => {
                if tokens.len() != n {
                    return Err(Error::invalid(format!("{} tokens for {n} residues", tokens.len())));
                }
                if let Some(t) = tokens.iter().find(|&&t| t > MASK_TOKEN) {
                    return Err(Error::invalid(format!("token {t} out of range")));
                }
                let mut idx = Vec::new();
                let mut seg = Vec::new();
                for i in 0..n {
                    for &tok in &tokens[i.saturating_sub(TOY_WINDOW)..(i + TOY_WINDOW + 1).min(n)] {
                        idx.push(tok as usize);
                        seg.push(i);
                    }
                }
                let table = ctx.p("embed.table");
                neighbor_mean(ctx, table, Rc::new(idx), &Segments::new(seg, n), 1)
            }
            _ => return Err(Error::Config("embedding input does not match the configured embedder".into())),
        };
        Ok(affine(ctx, "adapter", x))
    }

    /// Surface scalars from point features and the mean over the nearest
    /// residues of a perceptron on `[h0_s, distance]`; vectors start at zero.
    fn record_surface_init(&self, ctx: &mut Ctx, cloud: &SurfacePointCloud, coords: &[Vec3], h0_s: super::tape::Var) -> Result<StateVars> {
        let k = self.config.init_neighbors;
        if coords.len() < k {
            return Err(Error::invalid(format!(
                "surface initialization needs at least {k} residues, got {}",
                coords.len()
            )));
        }
        if cloud.is_empty() {
            return Err(Error::invalid("surface initialization needs a nonempty cloud"));
        }
        let nb = cross_knn(&cloud.points, coords, k)?;
        let n_s = cloud.len();
        let mut idx = Vec::with_capacity(n_s * k);
        let mut dist = Vec::with_capacity(n_s * k);
        let mut seg = Vec::with_capacity(n_s * k);
        for (i, row) in nb.iter().enumerate() {
            for &(j, d) in row {
                idx.push(j);
                dist.push(d);
                seg.push(i);
            }
        }
        let gathered = ctx.tape.gather(h0_s, Rc::new(idx), 1);
        let dist = ctx.constant(Tensor::from_vec(n_s * k, 1, dist));
        let inner_in = ctx.tape.concat(&[gathered, dist]);
        let inner = mlp(ctx, "surf.init_inner", inner_in);
        let avg = ctx.tape.segment_mean(inner, &Segments::new(seg, n_s), 1);
        let feats = ctx.constant(Tensor::from_vec(n_s, cloud.feature_dim, cloud.features.clone()));
        let outer_in = ctx.tape.concat(&[feats, avg]);
        let s = mlp(ctx, "surf.init_outer", outer_in);
        let v = ctx.constant(Tensor::zeros(3 * n_s, self.config.vector_dim));
        Ok(StateVars { s, v })
    }

    fn record_fusion(&self, ctx: &mut Ctx, res: StateVars, surf: StateVars, points: &[Vec3], coords: &[Vec3]) -> Result<StateVars> {
        let (idx, segs) = fusion_pairs(points, coords, self.config.fuse_neighbors)?;
        let idx = Rc::new(idx);
        let ms = neighbor_mean(ctx, surf.s, idx.clone(), &segs, 1);
        let s = ctx.tape.add(res.s, ms);
        let v = if self.config.fuse_scalar_only {
            res.v
        } else {
            let mv = neighbor_mean(ctx, surf.v, idx, &segs, 3);
            ctx.tape.add(res.v, mv)
        };
        Ok(StateVars { s, v })
    }

    fn record_forward(&self, ctx: &mut Ctx, input: &ForwardInput) -> Result<Recorded> {
        let cfg = &self.config;
        let protein = input.protein;
        let n = protein.len();
        check_masked(input.masked, n)?;
        let coords = &protein.ca_coords;
        let h0_s = self.embed(ctx, input.embedding, n, input.masked)?;
        let h0 = StateVars { s: h0_s, v: ctx.constant(Tensor::zeros(3 * n, cfg.vector_dim)) };

        let mut structure = None;
        let mut res = h0;
        if cfg.mode.uses_structure() {
            let graph = GraphVars::new(ctx, &self.structure_graph(coords));
            res = encoder(ctx, "struct", cfg.structure_layers, &graph, h0, cfg.normalize);
            structure = Some(res);
        }
        let mut surface = None;
        if cfg.mode.uses_surface() {
            let full = input
                .cloud
                .ok_or_else(|| Error::invalid(format!("mode {} needs a surface cloud", cfg.mode)))?;
            let prepared = self.prepare_surface(full, coords, input.masked)?;
            let init = self.record_surface_init(ctx, &prepared.cloud, coords, h0_s)?;
            let graph = GraphVars::new(ctx, &prepared.graph);
            let surf = encoder(ctx, "surf", cfg.surface_layers, &graph, init, cfg.normalize);
            res = self.record_fusion(ctx, res, surf, &prepared.cloud.points, coords)?;
            surface = Some(surf);
        }
        let rows = ctx.tape.gather(res.s, Rc::new(input.masked.to_vec()), 1);
        let logits = affine(ctx, "head", rows);
        let log_probs = ctx.tape.log_softmax(logits);
        Ok(Recorded { structure, surface, residue: res, log_probs })
    }

    /// Log-probabilities over the 20 residue types, one row per masked
    /// position in the given order.
    pub fn forward_logits(&self, input: &ForwardInput) -> Result<Tensor> {
        let mut ctx = Ctx::new(&self.params);
        let rec = self.record_forward(&mut ctx, input)?;
        Ok(ctx.value(rec.log_probs).clone())
    }

    /// Forward pass keeping the final state of every track.
    pub fn forward_trace(&self, input: &ForwardInput) -> Result<ForwardTrace> {
        let mut ctx = Ctx::new(&self.params);
        let rec = self.record_forward(&mut ctx, input)?;
        Ok(ForwardTrace {
            structure: rec.structure.map(|h| GvpState::read(&ctx, h)),
            surface: rec.surface.map(|h| GvpState::read(&ctx, h)),
            residue: GvpState::read(&ctx, rec.residue),
            log_probs: ctx.value(rec.log_probs).clone(),
        })
    }

    /// Mean cross-entropy over the masked positions against `targets`.
    pub fn loss(&self, input: &ForwardInput, targets: &[Residue]) -> Result<f64> {
        let mut ctx = Ctx::new(&self.params);
        let (loss, _) = self.record_loss(&mut ctx, input, targets)?;
        Ok(ctx.value(loss).data[0])
    }

    /// Loss plus gradients for every parameter (zeros for unused ones), in
    /// parameter order. Also returns the masked-position log-probabilities.
    pub fn loss_and_grads(&self, input: &ForwardInput, targets: &[Residue]) -> Result<(f64, Vec<Tensor>, Tensor)> {
        let mut ctx = Ctx::new(&self.params);
        let (loss, log_probs) = self.record_loss(&mut ctx, input, targets)?;
        let value = ctx.value(loss).data[0];
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {value} on {}", input.protein.id)));
        }
        let lp = ctx.value(log_probs).clone();
        Ok((value, ctx.param_grads(loss), lp))
    }

    fn record_loss(&self, ctx: &mut Ctx, input: &ForwardInput, targets: &[Residue]) -> Result<(super::tape::Var, super::tape::Var)> {
        if input.masked.is_empty() {
            return Err(Error::invalid("loss needs at least one masked position"));
        }
        if targets.len() != input.masked.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} masked positions",
                targets.len(),
                input.masked.len()
            )));
        }
        let rec = self.record_forward(ctx, input)?;
        let picks = targets.iter().enumerate().map(|(r, t)| (r, t.index())).collect();
        let loss = ctx.tape.nll(rec.log_probs, picks, 1.0 / targets.len() as f64);
        Ok((loss, rec.log_probs))
    }

    /// Structure encoder alone on explicit inputs.
    pub fn structure_forward(&self, graph: &SpatialGraph, h0: &GvpState) -> Result<GvpState> {
        self.run_encoder("struct", self.config.structure_layers, graph, h0)
    }

    /// Surface encoder alone on explicit inputs.
    pub fn surface_forward(&self, graph: &SpatialGraph, h0: &GvpState) -> Result<GvpState> {
        self.run_encoder("surf", self.config.surface_layers, graph, h0)
    }

    fn run_encoder(&self, prefix: &str, layers: usize, graph: &SpatialGraph, h0: &GvpState) -> Result<GvpState> {
        let (d, dv) = (self.config.scalar_dim, self.config.vector_dim);
        if h0.s.cols != d || h0.v.cols != dv || h0.v.rows != 3 * h0.s.rows {
            return Err(Error::invalid(format!(
                "state has widths ({}, {}), encoder expects ({d}, {dv})",
                h0.s.cols, h0.v.cols
            )));
        }
        if graph.n_nodes != h0.n_nodes() {
            return Err(Error::invalid("graph and state cover different node counts"));
        }
        if graph.n_kernels != self.config.rbf_kernels {
            return Err(Error::invalid("graph edge features do not match the RBF width"));
        }
        if layers > 0 && self.params.get(&format!("{prefix}.0.msg_a.wh")).is_none() {
            return Err(Error::Config(format!("mode {} has no `{prefix}` encoder", self.config.mode)));
        }
        let mut ctx = Ctx::new(&self.params);
        let h = h0.record(&mut ctx);
        let g = GraphVars::new(&mut ctx, graph);
        let out = encoder(&mut ctx, prefix, layers, &g, h, self.config.normalize);
        Ok(GvpState::read(&ctx, out))
    }

    /// Surface initialization alone: scalars from `h0_s` (`n_r x d`) and
    /// the cloud features.
    pub fn surface_init(&self, cloud: &SurfacePointCloud, coords: &[Vec3], h0_s: &Tensor) -> Result<GvpState> {
        if h0_s.rows != coords.len() || h0_s.cols != self.config.scalar_dim {
            return Err(Error::invalid("residue scalars do not match the coordinates and width"));
        }
        if cloud.feature_dim != self.config.surface_feature_dim {
            return Err(Error::invalid("surface feature width mismatch"));
        }
        let mut ctx = Ctx::new(&self.params);
        let h = ctx.constant(h0_s.clone());
        let out = self.record_surface_init(&mut ctx, cloud, coords, h)?;
        Ok(GvpState::read(&ctx, out))
    }

    /// `h0` scalars produced by the embedder and adapter.
    pub fn initial_scalars(&self, protein: &Protein, embedding: EmbeddingInput, masked: &[usize]) -> Result<Tensor> {
        let mut ctx = Ctx::new(&self.params);
        check_masked(masked, protein.len())?;
        let v = self.embed(&mut ctx, embedding, protein.len(), masked)?;
        Ok(ctx.value(v).clone())
    }
}

fn check_masked(masked: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &m in masked {
        if m >= n {
            return Err(Error::invalid(format!("masked position {m} out of range for {n} residues")));
        }
        if std::mem::replace(&mut seen[m], true) {
            return Err(Error::invalid(format!("masked position {m} listed twice")));
        }
    }
    Ok(())
}

fn fusion_pairs(points: &[Vec3], coords: &[Vec3], k: usize) -> Result<(Vec<usize>, Segments)> {
    if points.is_empty() {
        return Err(Error::invalid("fusion needs a nonempty surface cloud"));
    }
    let k = k.min(points.len());
    let nb = cross_knn(coords, points, k)?;
    let mut idx = Vec::with_capacity(coords.len() * k);
    let mut seg = Vec::with_capacity(coords.len() * k);
    for (i, row) in nb.iter().enumerate() {
        for &(j, _) in row {
            idx.push(j);
            seg.push(i);
        }
    }
    Ok((idx, Segments::new(seg, coords.len())))
}

/// Add to every residue the mean state of its `k` nearest surface points
/// (all points when the cloud is smaller than `k`).
pub fn fuse_residue_surface(
    h_res: &GvpState,
    h_surf: &GvpState,
    points: &[Vec3],
    coords: &[Vec3],
    k: usize,
    scalar_only: bool,
) -> Result<GvpState> {
    if h_surf.n_nodes() != points.len() || h_res.n_nodes() != coords.len() {
        return Err(Error::invalid("state sizes do not match the point sets"));
    }
    let (idx, segs) = fusion_pairs(points, coords, k)?;
    let params = Params::new();
    let mut ctx = Ctx::new(&params);
    let res = h_res.record(&mut ctx);
    let surf = h_surf.record(&mut ctx);
    let idx = Rc::new(idx);
    let ms = neighbor_mean(&mut ctx, surf.s, idx.clone(), &segs, 1);
    let s = ctx.tape.add(res.s, ms);
    let v = if scalar_only {
        res.v
    } else {
        let mv = neighbor_mean(&mut ctx, surf.v, idx, &segs, 3);
        ctx.tape.add(res.v, mv)
    };
    Ok(GvpState::read(&ctx, StateVars { s, v }))
}

/// One GVP on explicit inputs, using the tensors stored under `prefix`.
pub fn gvp_apply(params: &Params, prefix: &str, s: &Tensor, v: &Tensor, relu: bool) -> GvpState {
    let mut ctx = Ctx::new(params);
    let sv = ctx.constant(s.clone());
    let vv = ctx.constant(v.clone());
    let out = gvp(&mut ctx, prefix, sv, vv, relu);
    GvpState::read(&ctx, out)
}

/// Tokens for the toy embedder: the sequence with `masked` replaced by the
/// mask token.
pub fn masked_tokens(sequence: &[Residue], masked: &[usize]) -> Vec<u8> {
    let mut t: Vec<u8> = sequence.iter().map(|r| r.code()).collect();
    for &m in masked {
        t[m] = MASK_TOKEN;
    }
    t
}

/// Number of output classes of the head.
pub const N_CLASSES: usize = NUM_RESIDUE_TYPES;
