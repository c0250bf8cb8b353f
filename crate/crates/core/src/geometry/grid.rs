//! Uniform cell grid for exact radius and k-nearest-neighbor queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::vec3::{dist2, Vec3};

/// Below this many reference points, queries scan all points.
pub const BRUTE_FORCE_BELOW: usize = 64;

/// Candidate neighbor ordered by `(squared distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` best candidates under `(d2, idx)` ordering.
struct TopK {
    k: usize,
    heap: BinaryHeap<Cand>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    fn offer(&mut self, c: Cand) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn worst_d2(&self) -> Option<f64> {
        (self.heap.len() == self.k).then(|| self.heap.peek().map(|c| c.d2)).flatten()
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| (c.idx, c.d2.sqrt()))
            .collect()
    }
}

pub struct CellGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> CellGrid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 3];
            hi = [0.0; 3];
        }
        let mut cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let cap = (8 * points.len()).max(1024);
        let dims = loop {
            let d = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / cell).floor() as usize + 1);
            if d[0].saturating_mul(d[1]).saturating_mul(d[2]) <= cap {
                break d;
            }
            cell *= 1.5;
        };
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut grid = CellGrid { points, origin: lo, cell, dims, starts: vec![0; n_cells + 1], order: Vec::new() };
        let cell_ids: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_coords(*p))).collect();
        for &c in &cell_ids {
            grid.starts[c + 1] += 1;
        }
        for c in 0..n_cells {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        grid.order = vec![0; points.len()];
        for (i, &c) in cell_ids.iter().enumerate() {
            grid.order[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    /// Cell size for kNN queries so that a cell holds roughly `k` points.
    pub fn adaptive_cell(points: &[Vec3], k: usize) -> f64 {
        if points.len() < 2 {
            return 1.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let ext: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]).max(1e-6)).collect();
        let max_ext = ext.iter().cloned().fold(0.0, f64::max);
        // floor thin axes so flat or linear clouds still get sensible cells
        let vol: f64 = ext.iter().map(|e| e.max(max_ext * 0.05)).product();
        ((vol / points.len() as f64) * k.max(1) as f64).cbrt().max(1e-6)
    }

    fn cell_coords(&self, p: Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| ((p[a] - self.origin[a]) / self.cell).floor() as i64)
    }

    fn flat(&self, c: [i64; 3]) -> usize {
        let cl = |a: usize| c[a].clamp(0, self.dims[a] as i64 - 1) as usize;
        (cl(2) * self.dims[1] + cl(1)) * self.dims[0] + cl(0)
    }

    fn cell_points(&self, c: [i64; 3]) -> &[usize] {
        for a in 0..3 {
            if c[a] < 0 || c[a] >= self.dims[a] as i64 {
                return &[];
            }
        }
        let f = self.flat(c);
        &self.order[self.starts[f]..self.starts[f + 1]]
    }

    /// Visit every point with `d2 < r2` in ascending-index order per cell.
    pub fn for_each_within(&self, q: Vec3, r: f64, mut f: impl FnMut(usize, f64)) {
        let c = self.cell_coords(q);
        let reach = (r / self.cell).ceil() as i64;
        for dz in -reach..=reach {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    for &j in self.cell_points([c[0] + dx, c[1] + dy, c[2] + dz]) {
                        f(j, dist2(self.points[j], q));
                    }
                }
            }
        }
    }

    /// Exact k nearest points to `q` (optionally excluding one index),
    /// ascending by distance, ties broken by smaller index.
    pub fn knn(&self, q: Vec3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut top = TopK::new(k);
        if k == 0 {
            return Vec::new();
        }
        let c = self.cell_coords(q);
        let max_ring = (0..3)
            .map(|a| c[a].abs().max((self.dims[a] as i64 - 1 - c[a]).abs()))
            .max()
            .unwrap_or(0);
        for ring in 0..=max_ring {
            let span = |a: usize| (-ring).max(-c[a])..=ring.min(self.dims[a] as i64 - 1 - c[a]);
            for dz in span(2) {
                for dy in span(1) {
                    for dx in span(0) {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        for &j in self.cell_points([c[0] + dx, c[1] + dy, c[2] + dz]) {
                            if Some(j) != exclude {
                                top.offer(Cand { d2: dist2(self.points[j], q), idx: j });
                            }
                        }
                    }
                }
            }
            // unvisited points lie at least `ring * cell` away
            let bound = ring as f64 * self.cell;
            if let Some(w) = top.worst_d2() {
                if w < bound * bound {
                    break;
                }
            }
        }
        top.into_sorted()
    }
}

/// Brute-force k nearest neighbors with the same ordering contract.
pub fn knn_brute(points: &[Vec3], q: Vec3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut top = TopK::new(k);
    if k == 0 {
        return Vec::new();
    }
    for (j, p) in points.iter().enumerate() {
        if Some(j) != exclude {
            top.offer(Cand { d2: dist2(*p, q), idx: j });
        }
    }
    top.into_sorted()
}
