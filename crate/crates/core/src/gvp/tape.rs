//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Vector features are stored as `(3 n) x c` matrices: row `3 i + k` holds
//! coordinate `k` of the `c` vector channels of node `i`.

use std::rc::Rc;

use super::tensor::{gemm, Tensor};

/// Added under the square root of vector norms.
pub const NORM_EPS: f64 = 1e-8;
pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const VEC_RESCALE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Gather { src: Var, idx: Rc<Vec<usize>>, block: usize },
    SegmentMean { src: Var, seg: Rc<Vec<usize>>, inv_count: Rc<Vec<f64>>, block: usize },
    VecNorm(Var),
    VecGate(Var, Var),
    LayerNorm { src: Var, inv_std: Vec<f64> },
    VecRescale { src: Var, inv: Vec<f64> },
    LogSoftmax(Var),
    Nll { src: Var, picks: Vec<(usize, usize)>, scale: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Segment assignment with precomputed inverse counts, shareable between
/// the scalar and vector tracks.
#[derive(Debug, Clone)]
pub struct Segments {
    pub seg: Rc<Vec<usize>>,
    pub inv_count: Rc<Vec<f64>>,
}

impl Segments {
    /// Empty segments get an inverse count of zero, so their mean is zero.
    pub fn new(seg: Vec<usize>, n_out: usize) -> Self {
        let mut count = vec![0usize; n_out];
        for &s in &seg {
            count[s] += 1;
        }
        let inv_count = count.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f64 }).collect();
        Segments { seg: Rc::new(seg), inv_count: Rc::new(inv_count) }
    }

    pub fn n_out(&self) -> usize {
        self.inv_count.len()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = gemm(self.value(a), false, self.value(b), false);
        self.push(out, Op::MatMul(a, b))
    }

    /// `a + b` with `b` a `1 x cols` row broadcast over the rows of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Var {
        let (x, bias) = (self.value(a), self.value(b));
        assert_eq!((1, x.cols), bias.shape(), "bias shape");
        let mut out = x.clone();
        for r in 0..out.rows {
            for (o, bv) in out.row_mut(r).iter_mut().zip(&bias.data) {
                *o += bv;
            }
        }
        self.push(out, Op::AddBias(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(out.shape(), self.value(b).shape(), "add shape");
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "mul shape");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let out = Tensor::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| v * s).collect());
        self.push(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| v.max(0.0)).collect());
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|&v| sigmoid(v)).collect());
        self.push(out, Op::Sigmoid(a))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.rows, rows, "concat row count");
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + t.cols].copy_from_slice(t.row(r));
            }
            off += t.cols;
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Output block `r` is input block `idx[r]`; a block is `block`
    /// consecutive rows.
    pub fn gather(&mut self, src: Var, idx: Rc<Vec<usize>>, block: usize) -> Var {
        let x = self.value(src);
        let w = block * x.cols;
        let mut out = Tensor::zeros(idx.len() * block, x.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.data[r * w..(r + 1) * w].copy_from_slice(&x.data[i * w..(i + 1) * w]);
        }
        self.push(out, Op::Gather { src, idx, block })
    }

    /// Mean of input blocks grouped by `segs.seg`; empty segments are zero.
    pub fn segment_mean(&mut self, src: Var, segs: &Segments, block: usize) -> Var {
        let x = self.value(src);
        let w = block * x.cols;
        assert_eq!(x.rows, segs.seg.len() * block, "segment count");
        let mut out = Tensor::zeros(segs.n_out() * block, x.cols);
        for (e, &s) in segs.seg.iter().enumerate() {
            let f = segs.inv_count[s];
            let dst = &mut out.data[s * w..(s + 1) * w];
            for (o, v) in dst.iter_mut().zip(&x.data[e * w..(e + 1) * w]) {
                *o += f * v;
            }
        }
        let op = Op::SegmentMean { src, seg: segs.seg.clone(), inv_count: segs.inv_count.clone(), block };
        self.push(out, op)
    }

    /// Per node and channel, `sqrt(|v|^2 + eps)`: `(3n) x c -> n x c`.
    pub fn vec_norm(&mut self, v: Var) -> Var {
        let x = self.value(v);
        let n = x.rows / 3;
        let mut out = Tensor::zeros(n, x.cols);
        for i in 0..n {
            for c in 0..x.cols {
                let s: f64 = (0..3).map(|k| x.get(3 * i + k, c).powi(2)).sum();
                out.set(i, c, (s + NORM_EPS).sqrt());
            }
        }
        self.push(out, Op::VecNorm(v))
    }

    /// Scale vector channel `c` of node `i` by `g[i, c]`.
    pub fn vec_gate(&mut self, v: Var, g: Var) -> Var {
        let (x, gate) = (self.value(v), self.value(g));
        assert_eq!((x.rows, x.cols), (gate.rows * 3, gate.cols), "gate shape");
        let mut out = x.clone();
        for r in 0..x.rows {
            let grow = gate.row(r / 3);
            for (o, gv) in out.row_mut(r).iter_mut().zip(grow) {
                *o *= gv;
            }
        }
        self.push(out, Op::VecGate(v, g))
    }

    /// Row-wise standardization without affine parameters.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let row = out.row_mut(r);
            let n = row.len() as f64;
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mu) * inv;
            }
            inv_std.push(inv);
        }
        self.push(out, Op::LayerNorm { src: a, inv_std })
    }

    /// Divide the vector channels of each node by the root mean square of
    /// their norms.
    pub fn vec_rescale(&mut self, v: Var) -> Var {
        let x = self.value(v);
        let n = x.rows / 3;
        let mut out = x.clone();
        let mut invs = Vec::with_capacity(n);
        for i in 0..n {
            let block = &mut out.data[3 * i * x.cols..3 * (i + 1) * x.cols];
            let m = block.iter().map(|v| v * v).sum::<f64>() / x.cols.max(1) as f64;
            let inv = 1.0 / (m + VEC_RESCALE_EPS).sqrt();
            for b in block.iter_mut() {
                *b *= inv;
            }
            invs.push(inv);
        }
        self.push(out, Op::VecRescale { src: v, inv: invs })
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(out, Op::LogSoftmax(a))
    }

    /// `-scale * sum x[r, c]` over the picked entries, as a `1 x 1` value.
    pub fn nll(&mut self, logp: Var, picks: Vec<(usize, usize)>, scale: f64) -> Var {
        let x = self.value(logp);
        let s: f64 = picks.iter().map(|&(r, c)| x.get(r, c)).sum();
        self.push(Tensor::scalar(-scale * s), Op::Nll { src: logp, picks, scale })
    }

    /// Gradients of the `1 x 1` node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(self.value(out).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, gemm(g, false, bv, true));
                accumulate(grads, *b, gemm(av, true, g, false));
            }
            Op::AddBias(a, b) => {
                accumulate(grads, *a, g.clone());
                let mut gb = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(grads, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, zip_map(g, bv, |p, q| p * q));
                accumulate(grads, *b, zip_map(g, av, |p, q| p * q));
            }
            Op::Scale(a, s) => {
                accumulate(grads, *a, Tensor::from_vec(g.rows, g.cols, g.data.iter().map(|v| v * s).collect()));
            }
            Op::Relu(a) => {
                accumulate(grads, *a, zip_map(g, y, |gv, yv| if yv > 0.0 { gv } else { 0.0 }));
            }
            Op::Sigmoid(a) => {
                accumulate(grads, *a, zip_map(g, y, |gv, yv| gv * yv * (1.0 - yv)));
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols;
                    let mut gp = Tensor::zeros(g.rows, w);
                    for r in 0..g.rows {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                    }
                    accumulate(grads, p, gp);
                    off += w;
                }
            }
            Op::Gather { src, idx, block } => {
                let x = self.value(*src);
                let w = block * x.cols;
                let mut gs = Tensor::zeros(x.rows, x.cols);
                for (r, &i) in idx.iter().enumerate() {
                    let dst = &mut gs.data[i * w..(i + 1) * w];
                    for (o, v) in dst.iter_mut().zip(&g.data[r * w..(r + 1) * w]) {
                        *o += v;
                    }
                }
                accumulate(grads, *src, gs);
            }
            Op::SegmentMean { src, seg, inv_count, block } => {
                let x = self.value(*src);
                let w = block * x.cols;
                let mut gs = Tensor::zeros(x.rows, x.cols);
                for (e, &s) in seg.iter().enumerate() {
                    let f = inv_count[s];
                    for (o, v) in gs.data[e * w..(e + 1) * w].iter_mut().zip(&g.data[s * w..(s + 1) * w]) {
                        *o = f * v;
                    }
                }
                accumulate(grads, *src, gs);
            }
            Op::VecNorm(v) => {
                let x = self.value(*v);
                let mut gv = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    for c in 0..x.cols {
                        gv.set(r, c, g.get(r / 3, c) * x.get(r, c) / y.get(r / 3, c));
                    }
                }
                accumulate(grads, *v, gv);
            }
            Op::VecGate(v, gate) => {
                let (x, gt) = (self.value(*v), self.value(*gate));
                let mut gx = Tensor::zeros(x.rows, x.cols);
                let mut gg = Tensor::zeros(gt.rows, gt.cols);
                for r in 0..x.rows {
                    for c in 0..x.cols {
                        let gr = g.get(r, c);
                        gx.set(r, c, gr * gt.get(r / 3, c));
                        gg.data[(r / 3) * gt.cols + c] += gr * x.get(r, c);
                    }
                }
                accumulate(grads, *v, gx);
                accumulate(grads, *gate, gg);
            }
            Op::LayerNorm { src, inv_std } => {
                let mut gx = Tensor::zeros(g.rows, g.cols);
                let n = g.cols as f64;
                for r in 0..g.rows {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let mg = gr.iter().sum::<f64>() / n;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for ((o, gv), yv) in gx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                        *o = inv_std[r] * (gv - mg - yv * mgy);
                    }
                }
                accumulate(grads, *src, gx);
            }
            Op::VecRescale { src, inv } => {
                let cols = g.cols;
                let mut gx = Tensor::zeros(g.rows, cols);
                for (i, &s) in inv.iter().enumerate() {
                    let range = 3 * i * cols..3 * (i + 1) * cols;
                    let gy: f64 = g.data[range.clone()].iter().zip(&y.data[range.clone()]).map(|(a, b)| a * b).sum();
                    let f = gy / cols as f64;
                    for j in range {
                        gx.data[j] = s * (g.data[j] - y.data[j] * f);
                    }
                }
                accumulate(grads, *src, gx);
            }
            Op::LogSoftmax(a) => {
                let mut gx = Tensor::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let sg: f64 = g.row(r).iter().sum();
                    for ((o, gv), yv) in gx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                        *o = gv - yv.exp() * sg;
                    }
                }
                accumulate(grads, *a, gx);
            }
            Op::Nll { src, picks, scale } => {
                let x = self.value(*src);
                let mut gx = Tensor::zeros(x.rows, x.cols);
                let gs = g.data[0];
                for &(r, c) in picks {
                    gx.data[r * x.cols + c] -= scale * gs;
                }
                accumulate(grads, *src, gx);
            }
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` when the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads[v.0].take()
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(&p, &q)| f(p, q)).collect())
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
