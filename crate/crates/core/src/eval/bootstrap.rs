use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Standard error of `mean(a) - mean(b)` over paired per-assay metrics:
/// resample assay indices with replacement `n_boot` times and take the
/// population std of the resampled mean differences.
pub fn bootstrap_diff_stderr(a: &[f64], b: &[f64], n_boot: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired lists differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 paired values"));
    }
    if n_boot == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    Ok(population_std(&means))
}
