use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::residue::{Residue, MASK_TOKEN, NUM_RESIDUE_TYPES};

/// Corruption policy for masked-residue pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingPolicy {
    pub select_rate: f64,
    pub mask_rate: f64,
    pub random_rate: f64,
    pub keep_rate: f64,
    /// Surface points removed around each selected residue.
    pub excise_m: usize,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        MaskingPolicy { select_rate: 0.15, mask_rate: 0.8, random_rate: 0.1, keep_rate: 0.1, excise_m: 20 }
    }
}

impl MaskingPolicy {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.mask_rate, self.random_rate, self.keep_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) || (rates.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("mask, random and keep rates must be in [0, 1] and sum to 1".into()));
        }
        if !(self.select_rate > 0.0 && self.select_rate <= 1.0) {
            return Err(Error::Config("selection rate must lie in (0, 1]".into()));
        }
        if self.excise_m == 0 {
            return Err(Error::Config("excision count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAction {
    Mask,
    Random(Residue),
    Keep,
}

/// Outcome of one masking draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDraw {
    /// Selected positions, ascending.
    pub selected: Vec<usize>,
    /// Action per selected position.
    pub actions: Vec<MaskAction>,
    /// Corrupted token sequence (`MASK_TOKEN` for masked positions).
    pub tokens: Vec<u8>,
}

/// Select each position with `select_rate` (redrawing if none is
/// selected), then corrupt each selected position by the 80/10/10 style
/// action draw. Random types are uniform over all 20.
pub fn apply_mask<R: Rng + ?Sized>(sequence: &[Residue], rng: &mut R, policy: &MaskingPolicy) -> MaskDraw {
    assert!(!sequence.is_empty(), "masking needs a nonempty sequence");
    let selected = loop {
        let s: Vec<usize> = (0..sequence.len()).filter(|_| rng.random::<f64>() < policy.select_rate).collect();
        if !s.is_empty() {
            break s;
        }
    };
    let mut tokens: Vec<u8> = sequence.iter().map(|r| r.code()).collect();
    let actions = selected
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            let action = if u < policy.mask_rate {
                MaskAction::Mask
            } else if u < policy.mask_rate + policy.random_rate {
                MaskAction::Random(Residue::new(rng.random_range(0..NUM_RESIDUE_TYPES as u8)).expect("in range"))
            } else {
                MaskAction::Keep
            };
            tokens[p] = match action {
                MaskAction::Mask => MASK_TOKEN,
                MaskAction::Random(r) => r.code(),
                MaskAction::Keep => sequence[p].code(),
            };
            action
        })
        .collect();
    MaskDraw { selected, actions, tokens }
}
