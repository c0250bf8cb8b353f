use crate::error::{Error, Result};
use crate::eval::population_std;

/// `(x - mean) / std` with the population standard deviation.
pub fn zscores(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::invalid("z-scores need at least 2 values"));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let sd = population_std(x);
    if !(sd > 0.0) {
        return Err(Error::invalid("z-scores of a constant score list are undefined"));
    }
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Elementwise sum of the z-scores of two score lists over the same variants.
pub fn ensemble_zscores(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("score lists differ in length ({} vs {})", a.len(), b.len())));
    }
    let (za, zb) = (zscores(a)?, zscores(b)?);
    Ok(za.iter().zip(&zb).map(|(x, y)| x + y).collect())
}
