use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{add, cross, dist2, dot, normalize, scale, sub, Vec3};
use crate::protein_io::Protein;

use super::field::{smooth_distance, smooth_distance_grad};
use super::{surface_features, SurfaceConfig, SurfacePointCloud};

/// Sample the outer level set of the smooth distance field around the
/// alpha carbons. The returned cloud carries no features yet.
pub fn generate_surface(protein: &Protein, cfg: &SurfaceConfig) -> Result<SurfacePointCloud> {
    generate_surface_from_atoms(&protein.id, &protein.ca_coords, cfg)
}

/// [`generate_surface`] followed by [`surface_features`].
pub fn build_surface(protein: &Protein, cfg: &SurfaceConfig) -> Result<SurfacePointCloud> {
    let cloud = generate_surface(protein, cfg)?;
    let features = surface_features(&cloud, cfg)?;
    cloud.with_features(features, cfg.feature_dim())
}

/// Local orthonormal frame at each atom, built from its chain neighbors.
/// Seeding directions are drawn in these frames, so the sampling path
/// follows any rigid motion of the atoms.
fn atom_frames(atoms: &[Vec3]) -> Vec<[Vec3; 3]> {
    let n = atoms.len();
    (0..n)
        .map(|i| {
            let (a, b) = match n {
                1 => return identity_frame(),
                2 => (1 - i, 1 - i),
                _ if i == 0 => (1, 2),
                _ if i == n - 1 => (n - 2, n - 3),
                _ => (i + 1, i - 1),
            };
            let Some(e1) = normalize(sub(atoms[a], atoms[i])) else {
                return identity_frame();
            };
            let v = sub(atoms[b], atoms[i]);
            let e2 = normalize(sub(v, scale(e1, dot(v, e1)))).unwrap_or_else(|| any_perpendicular(e1));
            [e1, e2, cross(e1, e2)]
        })
        .collect()
}

fn identity_frame() -> [Vec3; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn any_perpendicular(e: Vec3) -> Vec3 {
    let axis = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    normalize(cross(e, axis)).expect("axis chosen non-parallel")
}

fn project_to_level(start: Vec3, atoms: &[Vec3], cfg: &SurfaceConfig) -> Option<(Vec3, Vec3)> {
    let level = cfg.level();
    let mut x = start;
    let (mut f, mut g) = smooth_distance_grad(x, atoms, cfg.smoothing);
    for _ in 0..cfg.max_newton_steps {
        let r = f - level;
        if r.abs() < cfg.projection_tol {
            return normalize(g).map(|n| (x, n));
        }
        let g2 = dot(g, g);
        if g2 < 1e-10 {
            return None;
        }
        // damped Newton step along the gradient
        let full = scale(g, r / g2);
        let mut t = 1.0;
        loop {
            let xn = sub(x, scale(full, t));
            let (fn_, gn) = smooth_distance_grad(xn, atoms, cfg.smoothing);
            if (fn_ - level).abs() < r.abs() || t < 1e-4 {
                x = xn;
                f = fn_;
                g = gn;
                break;
            }
            t *= 0.5;
        }
    }
    let (f, g) = smooth_distance_grad(x, atoms, cfg.smoothing);
    ((f - level).abs() < cfg.projection_tol).then_some(()).and_then(|_| normalize(g).map(|n| (x, n)))
}

/// A point is interior when its outward normal ray dips back below the
/// level within `2 * level`.
fn is_interior(p: Vec3, n: Vec3, atoms: &[Vec3], cfg: &SurfaceConfig) -> bool {
    let level = cfg.level();
    const STEPS: usize = 16;
    (1..=STEPS).any(|s| {
        let t = 2.0 * level * s as f64 / STEPS as f64;
        smooth_distance(add(p, scale(n, t)), atoms, cfg.smoothing) < level - cfg.projection_tol
    })
}

struct SpacingFilter {
    spacing: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl SpacingFilter {
    fn key(&self, p: Vec3) -> [i64; 3] {
        p.map(|c| (c / self.spacing).floor() as i64)
    }

    fn is_clear(&self, p: Vec3, kept: &[Vec3]) -> bool {
        let k = self.key(p);
        let s2 = self.spacing * self.spacing;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&j| dist2(kept[j], p) < s2) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: Vec3, idx: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(idx);
    }
}

pub fn generate_surface_from_atoms(id: &str, atoms: &[Vec3], cfg: &SurfaceConfig) -> Result<SurfacePointCloud> {
    cfg.validate()?;
    if atoms.is_empty() {
        return Err(Error::invalid("surface generation needs at least one atom"));
    }
    let level = cfg.level();
    let (n_min, n_max) = cfg.target_points;
    let frames = atom_frames(atoms);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut filter = SpacingFilter { spacing: level / 4.0, cells: HashMap::new() };
    let mut points: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();

    for _round in 0..cfg.max_rounds {
        let before = points.len();
        for (atom, frame) in atoms.iter().zip(&frames) {
            for _ in 0..cfg.seeds_per_atom {
                let u: [f64; 3] = [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ];
                let Some(u) = normalize(u) else { continue };
                let dir = add(add(scale(frame[0], u[0]), scale(frame[1], u[1])), scale(frame[2], u[2]));
                let seed = add(*atom, scale(dir, level));
                let Some((p, n)) = project_to_level(seed, atoms, cfg) else { continue };
                if !filter.is_clear(p, &points) || is_interior(p, n, atoms, cfg) {
                    continue;
                }
                filter.insert(p, points.len());
                points.push(p);
                normals.push(n);
            }
        }
        if points.len() >= n_min || points.len() == before {
            break;
        }
    }

    if points.len() < n_min {
        return Err(Error::Invalid(format!(
            "degenerate surface: {} points survived, at least {n_min} required",
            points.len()
        )));
    }
    if points.len() > n_max {
        let mut keep = rand::seq::index::sample(&mut rng, points.len(), n_max).into_vec();
        keep.sort_unstable();
        points = keep.iter().map(|&i| points[i]).collect();
        normals = keep.iter().map(|&i| normals[i]).collect();
    }
    Ok(SurfacePointCloud {
        points,
        normals,
        features: Vec::new(),
        feature_dim: 0,
        source_protein: id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::norm;

    fn small_cfg() -> SurfaceConfig {
        SurfaceConfig { target_points: (50, 400), ..Default::default() }
    }

    #[test]
    fn single_atom_gives_sphere() {
        let cfg = small_cfg();
        let cloud = generate_surface_from_atoms("one", &[[0.0; 3]], &cfg).unwrap();
        assert!(cloud.len() >= 50);
        for (p, n) in cloud.points.iter().zip(&cloud.normals) {
            assert!((norm(*p) - cfg.level()).abs() < 1e-3);
            let radial = scale(*p, 1.0 / norm(*p));
            for a in 0..3 {
                assert!((radial[a] - n[a]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn points_respect_spacing() {
        let cfg = small_cfg();
        let atoms = [[0.0; 3], [3.8, 0.0, 0.0], [5.0, 3.5, 0.0]];
        let cloud = generate_surface_from_atoms("x", &atoms, &cfg).unwrap();
        let s2 = (cfg.level() / 4.0).powi(2);
        for i in 0..cloud.len() {
            for j in 0..i {
                assert!(dist2(cloud.points[i], cloud.points[j]) >= s2);
            }
        }
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let cfg = SurfaceConfig { target_points: (100_000, 200_000), max_rounds: 2, ..Default::default() };
        let err = generate_surface_from_atoms("x", &[[0.0; 3]], &cfg).unwrap_err();
        assert!(err.to_string().contains("degenerate surface"));
    }

    #[test]
    fn subsampled_to_maximum() {
        let cfg = SurfaceConfig { target_points: (5, 20), ..Default::default() };
        let cloud = generate_surface_from_atoms("x", &[[0.0; 3], [3.8, 0.0, 0.0]], &cfg).unwrap();
        assert_eq!(cloud.len(), 20);
    }
}
