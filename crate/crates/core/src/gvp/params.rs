use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{EmbedderSpec, ModelConfig};
use super::tensor::Tensor;
use crate::residue::NUM_RESIDUE_TYPES;

/// Named parameter tensors in a fixed insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        match self.index.get(&name) {
            Some(&i) => self.tensors[i] = t,
            None => {
                self.index.insert(name.clone(), self.names.len());
                self.names.push(name);
                self.tensors.push(t);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Params {
        let mut p = self.clone();
        for t in &mut p.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        p
    }

    /// Round every value to the nearest `f32`, matching the checkpoint
    /// storage precision.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> Params {
        let mut p = Params::new();
        for (n, t) in self.iter() {
            if keep(n) {
                p.insert(n, t.clone());
            }
        }
        p
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, limit: f64) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect())
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
    uniform(rng, rows, cols, limit)
}

pub(crate) fn add_affine<R: Rng + ?Sized>(p: &mut Params, rng: &mut R, prefix: &str, fan_in: usize, fan_out: usize) {
    p.insert(format!("{prefix}.w"), glorot(rng, fan_in, fan_out));
    p.insert(format!("{prefix}.b"), Tensor::zeros(1, fan_out));
}

pub(crate) fn add_mlp<R: Rng + ?Sized>(p: &mut Params, rng: &mut R, prefix: &str, d_in: usize, hidden: usize, d_out: usize) {
    add_affine(p, rng, &format!("{prefix}.l1"), d_in, hidden);
    add_affine(p, rng, &format!("{prefix}.l2"), hidden, d_out);
}

/// Hidden vector width of a GVP: the larger of its input and output widths.
pub fn gvp_hidden(vi: usize, vo: usize) -> usize {
    vi.max(vo)
}

pub(crate) fn add_gvp<R: Rng + ?Sized>(
    p: &mut Params,
    rng: &mut R,
    prefix: &str,
    (si, vi): (usize, usize),
    (so, vo): (usize, usize),
) {
    let h = gvp_hidden(vi, vo);
    p.insert(format!("{prefix}.wh"), glorot(rng, vi, h));
    p.insert(format!("{prefix}.wmu"), glorot(rng, h, vo));
    p.insert(format!("{prefix}.wm"), glorot(rng, si + h, so));
    p.insert(format!("{prefix}.bm"), Tensor::zeros(1, so));
    p.insert(format!("{prefix}.wg"), glorot(rng, so, vo));
    p.insert(format!("{prefix}.bg"), Tensor::zeros(1, vo));
}

fn add_block<R: Rng + ?Sized>(p: &mut Params, rng: &mut R, prefix: &str, cfg: &ModelConfig) {
    let (d, dv, k) = (cfg.scalar_dim, cfg.vector_dim, cfg.rbf_kernels);
    add_gvp(p, rng, &format!("{prefix}.msg_a"), (d + k, dv + 1), (d, dv));
    add_gvp(p, rng, &format!("{prefix}.msg_b"), (d, dv), (d, dv));
    add_gvp(p, rng, &format!("{prefix}.ff_a"), (d, dv), (d, dv));
    add_gvp(p, rng, &format!("{prefix}.ff_b"), (d, dv), (d, dv));
}

/// Scale of the uniform initialization of the output head.
pub const HEAD_INIT: f64 = 1e-2;

/// Freshly initialized parameters for `cfg`; only the tensors its mode
/// uses are created.
pub fn init_params<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Params {
    let mut p = Params::new();
    let d = cfg.scalar_dim;
    if let EmbedderSpec::Toy { dim } = cfg.embedder {
        let table = (0..(NUM_RESIDUE_TYPES + 1) * dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        p.insert("embed.table", Tensor::from_vec(NUM_RESIDUE_TYPES + 1, dim, table));
    }
    add_affine(&mut p, rng, "adapter", cfg.embedder.dim(), d);
    if cfg.mode.uses_structure() {
        for l in 0..cfg.structure_layers {
            add_block(&mut p, rng, &format!("struct.{l}"), cfg);
        }
    }
    if cfg.mode.uses_surface() {
        add_mlp(&mut p, rng, "surf.init_inner", d + 1, cfg.init_hidden, d);
        add_mlp(&mut p, rng, "surf.init_outer", cfg.surface_feature_dim + d, cfg.init_hidden, d);
        for l in 0..cfg.surface_layers {
            add_block(&mut p, rng, &format!("surf.{l}"), cfg);
        }
    }
    p.insert("head.w", uniform(rng, d, NUM_RESIDUE_TYPES, HEAD_INIT));
    p.insert("head.b", Tensor::zeros(1, NUM_RESIDUE_TYPES));
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gvp::config::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_controls_tensor_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s2f = init_params(&ModelConfig::desk().with_mode(Mode::S2f), &mut rng);
        assert!(s2f.names().iter().all(|n| !n.starts_with("surf.")));
        assert!(s2f.get("struct.0.msg_a.wh").is_some());
        let surf = init_params(&ModelConfig::desk().with_mode(Mode::SurfOnly), &mut rng);
        assert!(surf.names().iter().all(|n| !n.starts_with("struct.")));
        assert_eq!(surf.get("surf.init_outer.l1.w").unwrap().shape(), (5 + 32, 32));
    }

    #[test]
    fn reference_size_is_moderate() {
        let cfg = ModelConfig { embedder: EmbedderSpec::File { dim: 1280 }, ..Default::default() };
        let p = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(p.n_scalars() > 100_000 && p.n_scalars() < 5_000_000, "{}", p.n_scalars());
    }
}
