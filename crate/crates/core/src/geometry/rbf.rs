use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian radial basis expansion of a distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub centers: Vec<f64>,
    pub gamma: f64,
}

impl RbfConfig {
    /// `n_kernels` centers evenly spaced on `[min_d, max_d]`, with
    /// `gamma = spacing^-2`.
    pub fn evenly_spaced(n_kernels: usize, min_d: f64, max_d: f64) -> Result<Self> {
        if n_kernels == 0 {
            return Err(Error::Config("rbf: need at least one kernel".into()));
        }
        if !(min_d < max_d) {
            return Err(Error::Config(format!("rbf: min {min_d} must be below max {max_d}")));
        }
        if n_kernels == 1 {
            return Ok(RbfConfig { centers: vec![min_d], gamma: (max_d - min_d).powi(-2) });
        }
        let step = (max_d - min_d) / (n_kernels - 1) as f64;
        let centers = (0..n_kernels).map(|r| min_d + step * r as f64).collect();
        Ok(RbfConfig { centers, gamma: step.powi(-2) })
    }

    pub fn n_kernels(&self) -> usize {
        self.centers.len()
    }
}

impl Default for RbfConfig {
    fn default() -> Self {
        RbfConfig::evenly_spaced(16, 0.0, 20.0).expect("valid default")
    }
}

/// `exp(-gamma (d - c_r)^2)` for each center.
pub fn rbf_expand(d: f64, cfg: &RbfConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.n_kernels()];
    rbf_expand_into(d, cfg, &mut out);
    out
}

pub fn rbf_expand_into(d: f64, cfg: &RbfConfig, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(&cfg.centers) {
        let x = d - c;
        *o = (-cfg.gamma * x * x).exp();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_center_is_one() {
        let cfg = RbfConfig::default();
        assert_eq!(rbf_expand(cfg.centers[0], &cfg)[0], 1.0);
        assert_eq!(rbf_expand(cfg.centers[5], &cfg)[5], 1.0);
    }

    #[test]
    fn one_width_away_is_inverse_e() {
        let cfg = RbfConfig::default();
        let d = cfg.centers[3] + 1.0 / cfg.gamma.sqrt();
        let v = rbf_expand(d, &cfg)[3];
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 0.36787944117144233).abs() < 1e-12);
    }

    #[test]
    fn reversed_centers_reverse_output() {
        let cfg = RbfConfig::default();
        let mut rev = cfg.clone();
        rev.centers.reverse();
        for d in [0.0, 1.3, 7.7, 25.0] {
            let mut a = rbf_expand(d, &cfg);
            a.reverse();
            assert_eq!(a, rbf_expand(d, &rev));
        }
    }

    #[test]
    fn default_spacing() {
        let cfg = RbfConfig::default();
        assert_eq!(cfg.n_kernels(), 16);
        assert_eq!(cfg.centers[0], 0.0);
        assert_eq!(cfg.centers[15], 20.0);
        assert!((cfg.gamma - (20.0f64 / 15.0).powi(-2)).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        assert!(RbfConfig::evenly_spaced(0, 0.0, 1.0).is_err());
        assert!(RbfConfig::evenly_spaced(4, 2.0, 1.0).is_err());
    }
}
