use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gvp::{Params, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { kind: OptimizerKind::Adam, learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First-order optimizer state; `step` counts applied updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &Params) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        Optimizer { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Apply one update. A pure function of `(params, grads, state)`.
    pub fn update(&mut self, params: &mut Params, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::invalid("gradient count does not match parameter count"));
        }
        let c = self.config;
        self.step += 1;
        let t = self.step as i32;
        let (bc1, bc2) = (1.0 - c.beta1.powi(t), 1.0 - c.beta2.powi(t));
        for (i, (p, g)) in params.tensors_mut().iter_mut().zip(grads).enumerate() {
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, gv) in p.data.iter_mut().zip(&g.data) {
                        *w -= c.learning_rate * gv;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
                    for j in 0..p.data.len() {
                        let gv = g.data[j];
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gv;
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gv * gv;
                        let mh = m[j] / bc1;
                        let vh = v[j] / bc2;
                        p.data[j] -= c.learning_rate * mh / (vh.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn round_to_f32(&mut self) {
        for t in self.m.iter_mut().chain(self.v.iter_mut()) {
            for x in &mut t.data {
                *x = *x as f32 as f64;
            }
        }
    }
}

/// Global L2 norm of all gradients.
pub fn grad_norm(grads: &[Tensor]) -> f64 {
    grads.iter().flat_map(|g| g.data.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescale so the global norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let n = grad_norm(grads);
    if n > max_norm && n > 0.0 {
        let s = max_norm / n;
        for g in grads.iter_mut() {
            g.data.iter_mut().for_each(|v| *v *= s);
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        let mut p = Params::new();
        p.insert("a", Tensor::from_vec(1, 2, vec![1.0, -2.0]));
        p
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = params();
        let mut opt = Optimizer::new(OptimizerConfig { learning_rate: 0.1, ..Default::default() }, &p);
        opt.update(&mut p, &[Tensor::from_vec(1, 2, vec![3.0, -0.5])]).unwrap();
        let d = p.get("a").unwrap();
        assert!((d.data[0] - 0.9).abs() < 1e-6 && (d.data[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn sgd_step() {
        let mut p = params();
        let cfg = OptimizerConfig { kind: OptimizerKind::Sgd, learning_rate: 0.5, ..Default::default() };
        let mut opt = Optimizer::new(cfg, &p);
        opt.update(&mut p, &[Tensor::from_vec(1, 2, vec![2.0, 2.0])]).unwrap();
        assert_eq!(p.get("a").unwrap().data, vec![0.0, -3.0]);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Tensor::from_vec(1, 2, vec![3.0, 4.0])];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((grad_norm(&g) - 1.0).abs() < 1e-12);
        let mut small = vec![Tensor::from_vec(1, 1, vec![0.5])];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small[0].data, vec![0.5]);
    }
}
