//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use protfit::geometry::Vec3;
use protfit::gvp::{EmbedderSpec, Mode, ModelConfig, Params, Tensor};
use protfit::protein_io::{Protein, ResidueEmbeddings};
use protfit::surface::{build_surface, SurfaceConfig, SurfacePointCloud};
use protfit::toy::random_protein;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Surface settings small enough for brute-force checks.
pub fn small_surface() -> SurfaceConfig {
    SurfaceConfig { target_points: (96, 192), seeds_per_atom: 8, hks_eigenpairs: 16, ..Default::default() }
}

/// Tiny network with every feature switched on.
pub fn tiny_config(mode: Mode, normalize: bool) -> ModelConfig {
    ModelConfig {
        mode,
        embedder: EmbedderSpec::Toy { dim: 4 },
        scalar_dim: 6,
        vector_dim: 3,
        structure_layers: 2,
        surface_layers: 2,
        init_hidden: 5,
        rbf_kernels: 4,
        normalize,
        ..Default::default()
    }
}

pub fn protein_with_cloud(n: usize, seed: u64) -> (Protein, SurfacePointCloud) {
    let p = random_protein(&format!("p{seed}"), n, &mut rng(seed));
    let c = build_surface(&p, &small_surface()).expect("surface of a random coil");
    (p, c)
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Indices of the `k` nearest `refs` to `q`, ties by index.
pub fn brute_knn(q: Vec3, refs: &[Vec3], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> =
        refs.iter().enumerate().filter(|(j, _)| Some(*j) != exclude).map(|(j, &r)| (j, dist(q, r))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// `(src, dst)` pairs with `0 < |x_src - x_dst| < cutoff`, sorted by `(dst, src)`.
pub fn brute_radius_edges(x: &[Vec3], cutoff: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..x.len() {
        for j in 0..x.len() {
            let d = dist(x[i], x[j]);
            if i != j && d > 0.0 && d < cutoff {
                e.push((j, i));
            }
        }
    }
    e
}

pub fn brute_knn_edges(x: &[Vec3], k: usize) -> Vec<(usize, usize)> {
    let k = k.min(x.len() - 1);
    (0..x.len()).flat_map(|i| brute_knn(x[i], x, k, Some(i)).into_iter().map(move |(j, _)| (j, i))).collect()
}

/// Points left after removing each site's `m` nearest (brute force).
pub fn brute_excise(points: &[Vec3], sites: &[Vec3], m: usize) -> Vec<usize> {
    let mut removed = vec![false; points.len()];
    for &s in sites {
        for (j, _) in brute_knn(s, points, m, None) {
            removed[j] = true;
        }
    }
    (0..points.len()).filter(|&j| !removed[j]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub s: Vec<f64>,
    pub v: Vec<Vec3>,
}

/// Straight-line evaluation of the network from its parameter tensors.
pub struct Naive<'a> {
    pub p: &'a Params,
    pub cfg: &'a ModelConfig,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'a> Naive<'a> {
    fn t(&self, name: &str) -> &Tensor {
        self.p.get(name).unwrap_or_else(|| panic!("missing {name}"))
    }

    pub fn affine(&self, prefix: &str, x: &[f64]) -> Vec<f64> {
        let (w, b) = (self.t(&format!("{prefix}.w")), self.t(&format!("{prefix}.b")));
        (0..w.cols).map(|o| b.get(0, o) + (0..w.rows).map(|i| x[i] * w.get(i, o)).sum::<f64>()).collect()
    }

    pub fn mlp(&self, prefix: &str, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = self.affine(&format!("{prefix}.l1"), x).into_iter().map(|v| v.max(0.0)).collect();
        self.affine(&format!("{prefix}.l2"), &h)
    }

    pub fn gvp(&self, prefix: &str, x: &Node, relu: bool) -> Node {
        let g = |n: &str| self.t(&format!("{prefix}.{n}"));
        let (wh, wmu, wm, bm, wg, bg) = (g("wh"), g("wmu"), g("wm"), g("bm"), g("wg"), g("bg"));
        let vh: Vec<Vec3> = (0..wh.cols)
            .map(|k| {
                let mut acc = [0.0; 3];
                for (c, v) in x.v.iter().enumerate() {
                    for a in 0..3 {
                        acc[a] += v[a] * wh.get(c, k);
                    }
                }
                acc
            })
            .collect();
        let mut cat = x.s.clone();
        cat.extend(vh.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + 1e-8).sqrt()));
        let s: Vec<f64> = (0..wm.cols)
            .map(|o| {
                let z = bm.get(0, o) + (0..wm.rows).map(|i| cat[i] * wm.get(i, o)).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
        let v = (0..wmu.cols)
            .map(|o| {
                let gate = sigmoid(bg.get(0, o) + (0..wg.rows).map(|i| s[i] * wg.get(i, o)).sum::<f64>());
                let mut acc = [0.0; 3];
                for (k, h) in vh.iter().enumerate() {
                    for a in 0..3 {
                        acc[a] += h[a] * wmu.get(k, o);
                    }
                }
                acc.map(|c| c * gate)
            })
            .collect();
        Node { s, v }
    }

    fn pre_norm(&self, x: &Node) -> Node {
        if !self.cfg.normalize {
            return x.clone();
        }
        let n = x.s.len() as f64;
        let mu = x.s.iter().sum::<f64>() / n;
        let var = x.s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let s = x.s.iter().map(|v| (v - mu) / (var + 1e-5).sqrt()).collect();
        let m = x.v.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum::<f64>() / x.v.len() as f64;
        let inv = 1.0 / (m + 1e-6).sqrt();
        Node { s, v: x.v.iter().map(|v| v.map(|c| c * inv)).collect() }
    }

    pub fn rbf(&self, d: f64) -> Vec<f64> {
        let k = self.cfg.rbf_kernels;
        let step = self.cfg.rbf_max / (k - 1) as f64;
        (0..k).map(|r| (-(d - r as f64 * step).powi(2) / (step * step)).exp()).collect()
    }

    /// Message and feed-forward blocks with brute-force edges `(src, dst)`.
    pub fn encoder(&self, prefix: &str, layers: usize, x: &[Vec3], edges: &[(usize, usize)], mut h: Vec<Node>) -> Vec<Node> {
        let n = h.len();
        for l in 0..layers {
            let normed: Vec<Node> = h.iter().map(|s| self.pre_norm(s)).collect();
            for i in 0..n {
                let incoming: Vec<usize> = edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
                if incoming.is_empty() {
                    continue;
                }
                let mut sum = Node { s: vec![0.0; h[i].s.len()], v: vec![[0.0; 3]; h[i].v.len()] };
                for &j in &incoming {
                    let ev = [x[j][0] - x[i][0], x[j][1] - x[i][1], x[j][2] - x[i][2]];
                    let mut s = normed[j].s.clone();
                    s.extend(self.rbf(dist(x[j], x[i])));
                    let mut v = normed[j].v.clone();
                    v.push(ev);
                    let a = self.gvp(&format!("{prefix}.{l}.msg_a"), &Node { s, v }, true);
                    let b = self.gvp(&format!("{prefix}.{l}.msg_b"), &a, false);
                    add_into(&mut sum, &b, 1.0);
                }
                add_into(&mut h[i], &sum, 1.0 / incoming.len() as f64);
            }
            for node in h.iter_mut() {
                let a = self.gvp(&format!("{prefix}.{l}.ff_a"), &self.pre_norm(node), true);
                let b = self.gvp(&format!("{prefix}.{l}.ff_b"), &a, false);
                add_into(node, &b, 1.0);
            }
        }
        h
    }

    pub fn embed_toy(&self, tokens: &[u8]) -> Vec<Vec<f64>> {
        let table = self.t("embed.table");
        let n = tokens.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(2);
                let hi = (i + 3).min(n);
                let mut acc = vec![0.0; table.cols];
                for &t in &tokens[lo..hi] {
                    for (a, v) in acc.iter_mut().zip(table.row(t as usize)) {
                        *a += v / (hi - lo) as f64;
                    }
                }
                self.affine("adapter", &acc)
            })
            .collect()
    }

    pub fn embed_file(&self, e: &ResidueEmbeddings) -> Vec<Vec<f64>> {
        (0..e.n_residues())
            .map(|i| self.affine("adapter", &e.row(i).iter().map(|&v| v as f64).collect::<Vec<_>>()))
            .collect()
    }

    pub fn surface_init(&self, cloud: &SurfacePointCloud, coords: &[Vec3], h0: &[Vec<f64>]) -> Vec<Node> {
        (0..cloud.len())
            .map(|i| {
                let nb = brute_knn(cloud.points[i], coords, self.cfg.init_neighbors, None);
                let mut avg = vec![0.0; self.cfg.scalar_dim];
                for &(j, d) in &nb {
                    let mut inp = h0[j].clone();
                    inp.push(d);
                    for (a, v) in avg.iter_mut().zip(self.mlp("surf.init_inner", &inp)) {
                        *a += v / nb.len() as f64;
                    }
                }
                let mut outer = cloud.feature_row(i).to_vec();
                outer.extend(avg);
                Node { s: self.mlp("surf.init_outer", &outer), v: vec![[0.0; 3]; self.cfg.vector_dim] }
            })
            .collect()
    }

    pub fn fuse(&self, res: &mut [Node], surf: &[Node], points: &[Vec3], coords: &[Vec3]) {
        let k = self.cfg.fuse_neighbors.min(points.len());
        for (i, node) in res.iter_mut().enumerate() {
            let nb = brute_knn(coords[i], points, k, None);
            let mut m = Node { s: vec![0.0; node.s.len()], v: vec![[0.0; 3]; node.v.len()] };
            for &(j, _) in &nb {
                add_into(&mut m, &surf[j], 1.0 / k as f64);
            }
            if self.cfg.fuse_scalar_only {
                m.v.iter_mut().for_each(|v| *v = [0.0; 3]);
            }
            add_into(node, &m, 1.0);
        }
    }

    /// Log-softmax rows at `masked` from precomputed adapter outputs.
    pub fn forward(&self, coords: &[Vec3], h0: Vec<Vec<f64>>, masked: &[usize], cloud: Option<&SurfacePointCloud>) -> Vec<Vec<f64>> {
        let cfg = self.cfg;
        let mut res: Vec<Node> = h0.iter().map(|s| Node { s: s.clone(), v: vec![[0.0; 3]; cfg.vector_dim] }).collect();
        if cfg.mode.uses_structure() {
            res = self.encoder("struct", cfg.structure_layers, coords, &brute_radius_edges(coords, cfg.radius), res);
        }
        if cfg.mode.uses_surface() {
            let full = cloud.expect("surface modes need a cloud");
            let sites: Vec<Vec3> = masked.iter().map(|&i| coords[i]).collect();
            let keep = if masked.is_empty() { (0..full.len()).collect() } else { brute_excise(&full.points, &sites, cfg.excise_m) };
            let cloud = full.subset(&keep);
            let init = self.surface_init(&cloud, coords, &h0);
            let edges = brute_knn_edges(&cloud.points, cfg.surface_knn);
            let surf = self.encoder("surf", cfg.surface_layers, &cloud.points, &edges, init);
            self.fuse(&mut res, &surf, &cloud.points, coords);
        }
        masked
            .iter()
            .map(|&i| {
                let z = self.affine("head", &res[i].s);
                let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                z.iter().map(|v| v - lse).collect()
            })
            .collect()
    }
}

pub fn add_into(dst: &mut Node, src: &Node, w: f64) {
    for (a, b) in dst.s.iter_mut().zip(&src.s) {
        *a += w * b;
    }
    for (a, b) in dst.v.iter_mut().zip(&src.v) {
        for k in 0..3 {
            a[k] += w * b[k];
        }
    }
}

pub fn max_abs_diff_rows(a: &Tensor, b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.rows, b.len());
    (0..a.rows).flat_map(|r| a.row(r).iter().zip(&b[r]).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()).fold(0.0, f64::max)
}

/// Rank of each value by pairwise counting, ties sharing their mean rank.
pub fn naive_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    naive_pearson(&naive_ranks(a), &naive_ranks(b))
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn naive_auc(s: &[f64], l: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] == 1 && l[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

pub fn naive_median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn naive_mcc(s: &[f64], l: &[u8]) -> f64 {
    let t = naive_median(s);
    let count = |pred: bool, lab: u8| s.iter().zip(l).filter(|(&x, &y)| (x > t) == pred && y == lab).count() as f64;
    let (tp, tn, fp, fneg) = (count(true, 1), count(false, 0), count(true, 0), count(false, 1));
    let den = ((tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fneg) / den
    }
}

/// Order by repeatedly taking the largest remaining value (lowest index on ties).
pub fn naive_descending(x: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..x.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for k in 1..left.len() {
            if x[left[k]] > x[left[best]] {
                best = k;
            }
        }
        out.push(left.remove(best));
    }
    out
}

pub fn naive_ndcg(s: &[f64], y: &[f64]) -> f64 {
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return 1.0;
    }
    let g: Vec<f64> = y.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let dcg = |order: Vec<usize>| order.iter().enumerate().map(|(r, &i)| g[i] / (r as f64 + 2.0).log2()).sum::<f64>();
    dcg(naive_descending(s)) / dcg(naive_descending(&g))
}

pub fn naive_recall(s: &[f64], y: &[f64], frac: f64) -> f64 {
    let k = ((frac * s.len() as f64).floor() as usize).max(1);
    let a = &naive_descending(s)[..k];
    let b = &naive_descending(y)[..k];
    a.iter().filter(|i| b.contains(i)).count() as f64 / k as f64
}

pub fn naive_pop_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}
