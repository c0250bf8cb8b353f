//! Spatial graphs (radius and kNN), cross-set nearest-neighbor queries and
//! RBF edge featurization.
//!
//! All neighbor searches are exact. Ties in distance are broken by the
//! smaller point index so graphs are reproducible across runs.

mod grid;
mod rbf;
mod vec3;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use grid::{knn_brute, CellGrid, BRUTE_FORCE_BELOW};
pub use rbf::{rbf_expand, rbf_expand_into, RbfConfig};
pub use vec3::*;

/// Directed graph over points with messages flowing `src -> dst`.
///
/// Edges are sorted by `(dst, src)`, so the in-edges of a node form one
/// contiguous block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    pub n_nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// `x_src - x_dst` per edge.
    pub edge_vec: Vec<Vec3>,
    pub edge_dist: Vec<f64>,
    /// Row-major `n_edges x n_kernels` RBF features of `edge_dist`.
    pub edge_scalar: Vec<f64>,
    pub n_kernels: usize,
}

impl SpatialGraph {
    fn from_pairs(coords: &[Vec3], mut pairs: Vec<(usize, usize)>, rbf: &RbfConfig) -> Self {
        pairs.sort_unstable_by_key(|&(src, dst)| (dst, src));
        let n_kernels = rbf.n_kernels();
        let mut g = SpatialGraph {
            n_nodes: coords.len(),
            src: Vec::with_capacity(pairs.len()),
            dst: Vec::with_capacity(pairs.len()),
            edge_vec: Vec::with_capacity(pairs.len()),
            edge_dist: Vec::with_capacity(pairs.len()),
            edge_scalar: vec![0.0; pairs.len() * n_kernels],
            n_kernels,
        };
        for (e, &(s, d)) in pairs.iter().enumerate() {
            let v = sub(coords[s], coords[d]);
            let dd = norm(v);
            g.src.push(s);
            g.dst.push(d);
            g.edge_vec.push(v);
            g.edge_dist.push(dd);
            rbf_expand_into(dd, rbf, &mut g.edge_scalar[e * n_kernels..(e + 1) * n_kernels]);
        }
        g
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    pub fn edge_rbf(&self, e: usize) -> &[f64] {
        &self.edge_scalar[e * self.n_kernels..(e + 1) * self.n_kernels]
    }

    /// Sources of the in-edges of `i`, in edge order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let lo = self.dst.partition_point(|&d| d < i);
        let hi = self.dst.partition_point(|&d| d <= i);
        self.src[lo..hi].to_vec()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &d in &self.dst {
            deg[d] += 1;
        }
        deg
    }

    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        self.src.iter().copied().zip(self.dst.iter().copied()).collect()
    }
}

/// Edges `(j, i)` for every ordered pair with `0 < |x_j - x_i| < cutoff`.
pub fn build_radius_graph(coords: &[Vec3], cutoff: f64) -> SpatialGraph {
    build_radius_graph_with(coords, cutoff, &RbfConfig::default())
}

pub fn build_radius_graph_with(coords: &[Vec3], cutoff: f64, rbf: &RbfConfig) -> SpatialGraph {
    let n = coords.len();
    let neighbor_lists: Vec<Vec<usize>> = if n < BRUTE_FORCE_BELOW {
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| {
                        let d = dist(coords[j], coords[i]);
                        j != i && d > 0.0 && d < cutoff
                    })
                    .collect()
            })
            .collect()
    } else {
        let grid = CellGrid::new(coords, cutoff);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                grid.for_each_within(coords[i], cutoff, |j, d2| {
                    let d = d2.sqrt();
                    if j != i && d > 0.0 && d < cutoff {
                        out.push(j);
                    }
                });
                out
            })
            .collect()
    };
    let pairs = neighbor_lists
        .into_iter()
        .enumerate()
        .flat_map(|(i, js)| js.into_iter().map(move |j| (j, i)))
        .collect();
    SpatialGraph::from_pairs(coords, pairs, rbf)
}

/// Each node receives edges from its `min(k, n-1)` nearest other nodes.
pub fn build_knn_graph(coords: &[Vec3], k: usize) -> Result<SpatialGraph> {
    build_knn_graph_with(coords, k, &RbfConfig::default())
}

pub fn build_knn_graph_with(coords: &[Vec3], k: usize, rbf: &RbfConfig) -> Result<SpatialGraph> {
    let lists = knn_lists(coords, k)?;
    let pairs = lists
        .into_iter()
        .enumerate()
        .flat_map(|(i, js)| js.into_iter().map(move |(j, _)| (j, i)))
        .collect();
    Ok(SpatialGraph::from_pairs(coords, pairs, rbf))
}

/// Per-node nearest other nodes (self excluded), `min(k, n-1)` each.
pub fn knn_lists(coords: &[Vec3], k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::invalid(format!("kNN graph needs at least 2 points, got {n}")));
    }
    if k == 0 {
        return Err(Error::invalid("kNN graph needs k >= 1"));
    }
    let k = k.min(n - 1);
    Ok(if n < BRUTE_FORCE_BELOW {
        (0..n).map(|i| knn_brute(coords, coords[i], k, Some(i))).collect()
    } else {
        let grid = CellGrid::new(coords, CellGrid::adaptive_cell(coords, k));
        (0..n).into_par_iter().map(|i| grid.knn(coords[i], k, Some(i))).collect()
    })
}

/// The `k` nearest reference points of every query, ascending by distance,
/// ties by smaller reference index.
pub fn cross_knn(queries: &[Vec3], refs: &[Vec3], k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if k == 0 {
        return Err(Error::invalid("cross kNN needs k >= 1"));
    }
    if refs.len() < k {
        return Err(Error::invalid(format!(
            "cross kNN: {} reference points, fewer than k = {k}",
            refs.len()
        )));
    }
    Ok(if refs.len() < BRUTE_FORCE_BELOW {
        queries.iter().map(|q| knn_brute(refs, *q, k, None)).collect()
    } else {
        let grid = CellGrid::new(refs, CellGrid::adaptive_cell(refs, k));
        queries.par_iter().map(|q| grid.knn(*q, k, None)).collect()
    })
}
