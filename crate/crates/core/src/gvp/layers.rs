//! Network building blocks recorded on a [`Tape`].

use std::rc::Rc;

use super::params::Params;
use super::tape::{Gradients, Segments, Tape, Var};
use super::tensor::Tensor;
use crate::geometry::SpatialGraph;

/// A tape plus lazily registered parameter leaves.
pub struct Ctx<'p> {
    pub tape: Tape,
    params: &'p Params,
    vars: Vec<Option<Var>>,
}

impl<'p> Ctx<'p> {
    pub fn new(params: &'p Params) -> Self {
        Ctx { tape: Tape::new(), params, vars: vec![None; params.len()] }
    }

    /// Leaf for parameter `name`, created on first use.
    ///
    /// Panics when the parameter does not exist; model code only asks for
    /// tensors its configuration created.
    pub fn p(&mut self, name: &str) -> Var {
        let i = self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("missing parameter `{name}`"));
        if let Some(v) = self.vars[i] {
            return v;
        }
        let v = self.tape.leaf(self.params.tensors()[i].clone());
        self.vars[i] = Some(v);
        v
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.tape.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.tape.value(v)
    }

    /// Per-parameter gradients of `loss`, aligned with the parameter order;
    /// unused parameters get zeros.
    pub fn param_grads(&self, loss: Var) -> Vec<Tensor> {
        let mut g: Gradients = self.tape.backward(loss);
        self.params
            .tensors()
            .iter()
            .zip(&self.vars)
            .map(|(t, v)| v.and_then(|v| g.take(v)).unwrap_or_else(|| Tensor::zeros(t.rows, t.cols)))
            .collect()
    }
}

/// Scalar and vector tracks of a set of nodes on the tape.
#[derive(Debug, Clone, Copy)]
pub struct StateVars {
    pub s: Var,
    /// `(3 n) x d'`.
    pub v: Var,
}

pub fn affine(ctx: &mut Ctx, prefix: &str, x: Var) -> Var {
    let w = ctx.p(&format!("{prefix}.w"));
    let b = ctx.p(&format!("{prefix}.b"));
    let m = ctx.tape.matmul(x, w);
    ctx.tape.add_bias(m, b)
}

/// Two affine maps with a ReLU in between.
pub fn mlp(ctx: &mut Ctx, prefix: &str, x: Var) -> Var {
    let h = affine(ctx, &format!("{prefix}.l1"), x);
    let h = ctx.tape.relu(h);
    affine(ctx, &format!("{prefix}.l2"), h)
}

/// Geometric vector perceptron with a vector gate.
///
/// `V_h = V W_h`, `s' = act([s, |V_h|] W_m + b_m)`,
/// `V' = (V_h W_mu) * sigmoid(s' W_g + b_g)`.
pub fn gvp(ctx: &mut Ctx, prefix: &str, s: Var, v: Var, relu: bool) -> StateVars {
    let wh = ctx.p(&format!("{prefix}.wh"));
    let wmu = ctx.p(&format!("{prefix}.wmu"));
    let wm = ctx.p(&format!("{prefix}.wm"));
    let bm = ctx.p(&format!("{prefix}.bm"));
    let wg = ctx.p(&format!("{prefix}.wg"));
    let bg = ctx.p(&format!("{prefix}.bg"));
    let t = &mut ctx.tape;
    let vh = t.matmul(v, wh);
    let vn = t.vec_norm(vh);
    let cat = t.concat(&[s, vn]);
    let pre = t.matmul(cat, wm);
    let pre = t.add_bias(pre, bm);
    let s_out = if relu { t.relu(pre) } else { pre };
    let vmu = t.matmul(vh, wmu);
    let gl = t.matmul(s_out, wg);
    let gl = t.add_bias(gl, bg);
    let gate = t.sigmoid(gl);
    let v_out = t.vec_gate(vmu, gate);
    StateVars { s: s_out, v: v_out }
}

/// Graph connectivity and edge features as tape constants.
pub struct GraphVars {
    pub src: Rc<Vec<usize>>,
    pub dst: Segments,
    /// `E x K` RBF features.
    pub rbf: Var,
    /// `(3 E) x 1` displacement vectors `x_src - x_dst`.
    pub edge_vec: Var,
}

impl GraphVars {
    pub fn new(ctx: &mut Ctx, g: &SpatialGraph) -> Self {
        let e = g.n_edges();
        let rbf = ctx.constant(Tensor::from_vec(e, g.n_kernels, g.edge_scalar.clone()));
        let ev = g.edge_vec.iter().flat_map(|v| v.iter().copied()).collect();
        let edge_vec = ctx.constant(Tensor::from_vec(3 * e, 1, ev));
        GraphVars {
            src: Rc::new(g.src.clone()),
            dst: Segments::new(g.dst.clone(), g.n_nodes),
            rbf,
            edge_vec,
        }
    }
}

fn pre_norm(ctx: &mut Ctx, h: StateVars, normalize: bool) -> StateVars {
    if normalize {
        StateVars { s: ctx.tape.layer_norm(h.s), v: ctx.tape.vec_rescale(h.v) }
    } else {
        h
    }
}

fn residual(ctx: &mut Ctx, h: StateVars, d: StateVars) -> StateVars {
    StateVars { s: ctx.tape.add(h.s, d.s), v: ctx.tape.add(h.v, d.v) }
}

/// `h_i + mean_{j in N(i)} GVP(h_j, e_ji)`; nodes without in-edges get a
/// zero message.
pub fn message_block(ctx: &mut Ctx, prefix: &str, graph: &GraphVars, h: StateVars, normalize: bool) -> StateVars {
    let x = pre_norm(ctx, h, normalize);
    let t = &mut ctx.tape;
    let sj = t.gather(x.s, graph.src.clone(), 1);
    let vj = t.gather(x.v, graph.src.clone(), 3);
    let ms = t.concat(&[sj, graph.rbf]);
    let mv = t.concat(&[vj, graph.edge_vec]);
    let a = gvp(ctx, &format!("{prefix}.msg_a"), ms, mv, true);
    let b = gvp(ctx, &format!("{prefix}.msg_b"), a.s, a.v, false);
    let agg = StateVars {
        s: ctx.tape.segment_mean(b.s, &graph.dst, 1),
        v: ctx.tape.segment_mean(b.v, &graph.dst, 3),
    };
    residual(ctx, h, agg)
}

/// `h_i + GVP(h_i)`.
pub fn feedforward_block(ctx: &mut Ctx, prefix: &str, h: StateVars, normalize: bool) -> StateVars {
    let x = pre_norm(ctx, h, normalize);
    let a = gvp(ctx, &format!("{prefix}.ff_a"), x.s, x.v, true);
    let b = gvp(ctx, &format!("{prefix}.ff_b"), a.s, a.v, false);
    residual(ctx, h, b)
}

/// `layers` message + feed-forward blocks named `{prefix}.{l}`.
pub fn encoder(ctx: &mut Ctx, prefix: &str, layers: usize, graph: &GraphVars, mut h: StateVars, normalize: bool) -> StateVars {
    for l in 0..layers {
        let name = format!("{prefix}.{l}");
        h = message_block(ctx, &name, graph, h, normalize);
        h = feedforward_block(ctx, &name, h, normalize);
    }
    h
}

/// Mean of `k` gathered blocks per output node; `idx` lists the gathered
/// rows output by output, `k` at a time.
pub fn neighbor_mean(ctx: &mut Ctx, x: Var, idx: Rc<Vec<usize>>, segs: &Segments, block: usize) -> Var {
    let g = ctx.tape.gather(x, idx, block);
    ctx.tape.segment_mean(g, segs, block)
}
