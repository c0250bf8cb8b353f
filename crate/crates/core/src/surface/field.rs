use crate::geometry::{dist, scale, sub, Vec3};

/// Soft-min of atom distances:
/// `-s * ln(sum_a exp(-|x - a| / s))`.
pub fn smooth_distance(x: Vec3, atoms: &[Vec3], smoothing: f64) -> f64 {
    let dmin = atoms.iter().map(|a| dist(x, *a)).fold(f64::INFINITY, f64::min);
    let sum: f64 = atoms
        .iter()
        .map(|a| (-(dist(x, *a) - dmin) / smoothing).exp())
        .sum();
    dmin - smoothing * sum.ln()
}

/// Field value and analytic gradient. The gradient is the softmax-weighted
/// mean of unit vectors pointing away from each atom.
pub fn smooth_distance_grad(x: Vec3, atoms: &[Vec3], smoothing: f64) -> (f64, Vec3) {
    let dists: Vec<f64> = atoms.iter().map(|a| dist(x, *a)).collect();
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut g = [0.0; 3];
    for (a, &d) in atoms.iter().zip(&dists) {
        let w = (-(d - dmin) / smoothing).exp();
        sum += w;
        if d > 0.0 {
            let u = scale(sub(x, *a), w / d);
            g = [g[0] + u[0], g[1] + u[1], g[2] + u[2]];
        }
    }
    (dmin - smoothing * sum.ln(), scale(g, 1.0 / sum))
}
