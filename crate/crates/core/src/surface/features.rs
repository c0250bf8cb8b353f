use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, knn_lists, normalize, sub, Vec3};

use super::spectral::lowest_laplacian_eigenpairs;
use super::{SurfaceConfig, SurfacePointCloud};

/// Gaussian curvature per point from a quadric `z = a x^2 + b x y + c y^2`
/// fitted over the `k` nearest neighbors in the tangent frame of the
/// point's normal; `K = 4ac - b^2`.
pub fn gaussian_curvature(points: &[Vec3], normals: &[Vec3], k: usize) -> Result<Vec<f64>> {
    if points.len() < k + 1 {
        return Err(Error::invalid(format!(
            "curvature needs at least {} points, got {}",
            k + 1,
            points.len()
        )));
    }
    let lists = knn_lists(points, k)?;
    Ok(points
        .iter()
        .zip(normals)
        .zip(&lists)
        .map(|((p, n), nbrs)| {
            let axis = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let Some(e1) = normalize(cross(*n, axis)) else { return 0.0 };
            let e2 = cross(*n, e1);
            // normal equations for the three quadric coefficients
            let mut ata = [[0.0f64; 3]; 3];
            let mut atz = [0.0f64; 3];
            for &(j, _) in nbrs {
                let d = sub(points[j], *p);
                let (x, y, z) = (dot(d, e1), dot(d, e2), dot(d, *n));
                let row = [x * x, x * y, y * y];
                for r in 0..3 {
                    atz[r] += row[r] * z;
                    for c in 0..3 {
                        ata[r][c] += row[r] * row[c];
                    }
                }
            }
            match solve3(ata, atz) {
                Some([a, b, c]) => 4.0 * a * c - b * b,
                None => 0.0,
            }
        })
        .collect())
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(d.abs() > 1e-14 * scale.powi(3)) {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Heat kernel signatures `sum_r exp(-lambda_r t) phi_r(i)^2` for each `t`,
/// from the lowest eigenpairs of the normalized Laplacian of the symmetrized
/// kNN graph with weights `exp(-d^2 / sigma^2)` (`sigma` = mean edge length).
///
/// Returns row-major `n x times.len()`.
pub fn heat_kernel_signatures(points: &[Vec3], k: usize, n_eig: usize, times: &[f64]) -> Result<Vec<f64>> {
    let n = points.len();
    let lists = knn_lists(points, k)?;
    let n_dir: usize = lists.iter().map(Vec::len).sum();
    let sigma = lists.iter().flatten().map(|&(_, d)| d).sum::<f64>() / n_dir as f64;
    if !(sigma > 0.0) {
        return Err(Error::Numerical("heat kernel: all neighbor distances are zero".into()));
    }
    let mut undirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, nbrs) in lists.iter().enumerate() {
        for &(j, d) in nbrs {
            let key = (i.min(j), i.max(j));
            undirected.insert(key, (-(d * d) / (sigma * sigma)).exp());
        }
    }
    let edges: Vec<(usize, usize, f64)> = undirected.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    let eig = lowest_laplacian_eigenpairs(n, &edges, n_eig)?;
    let mut out = vec![0.0; n * times.len()];
    for (lambda, phi) in eig.values.iter().zip(&eig.vectors) {
        for (ti, &t) in times.iter().enumerate() {
            let decay = (-lambda.max(0.0) * t).exp();
            for i in 0..n {
                out[i * times.len() + ti] += decay * phi[i] * phi[i];
            }
        }
    }
    Ok(out)
}

/// Rescale each column of a row-major matrix to zero mean and unit
/// (population) variance; constant columns become zero.
pub fn standardize_columns(data: &mut [f64], cols: usize) {
    if cols == 0 || data.is_empty() {
        return;
    }
    let rows = data.len() / cols;
    for c in 0..cols {
        let mean = (0..rows).map(|r| data[r * cols + c]).sum::<f64>() / rows as f64;
        let var = (0..rows).map(|r| (data[r * cols + c] - mean).powi(2)).sum::<f64>() / rows as f64;
        let std = var.sqrt();
        for r in 0..rows {
            let v = &mut data[r * cols + c];
            *v = if std > 1e-12 { (*v - mean) / std } else { 0.0 };
        }
    }
}

/// Standardized `[curvature, hks(t_1), ..., hks(t_T)]` per point.
pub fn surface_features(cloud: &SurfacePointCloud, cfg: &SurfaceConfig) -> Result<Vec<f64>> {
    let n = cloud.len();
    if n < cfg.curvature_k + 1 {
        return Err(Error::invalid(format!(
            "surface features need at least {} points, cloud has {n}",
            cfg.curvature_k + 1
        )));
    }
    let curvature = gaussian_curvature(&cloud.points, &cloud.normals, cfg.curvature_k)?;
    let hks = heat_kernel_signatures(&cloud.points, cfg.knn_k, cfg.hks_eigenpairs, &cfg.hks_times)?;
    let d = cfg.feature_dim();
    let t = cfg.hks_times.len();
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        out[i * d] = curvature[i];
        out[i * d + 1..(i + 1) * d].copy_from_slice(&hks[i * t..(i + 1) * t]);
    }
    standardize_columns(&mut out, d);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("surface features: non-finite value".into()));
    }
    Ok(out)
}
