use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{cross_knn, dist2, Vec3};

use super::SurfacePointCloud;

/// Partition of the original cloud indices into kept and removed points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcisionMap {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

/// Remove, for every given residue, its `m` nearest surface points (union
/// over residues). Normals and features of kept points are carried over.
pub fn excise_near_residue(
    cloud: &SurfacePointCloud,
    residue_coords: &[Vec3],
    m: usize,
) -> Result<(SurfacePointCloud, ExcisionMap)> {
    if m == 0 {
        return Err(Error::invalid("excision needs m >= 1"));
    }
    if cloud.len() <= m {
        return Err(Error::invalid(format!(
            "excision of {m} points from a cloud of {} would leave nothing",
            cloud.len()
        )));
    }
    let removed: BTreeSet<usize> = cross_knn(residue_coords, &cloud.points, m)?
        .into_iter()
        .flatten()
        .map(|(j, _)| j)
        .collect();
    if removed.len() >= cloud.len() {
        return Err(Error::invalid("excision would empty the surface cloud"));
    }
    let kept: Vec<usize> = (0..cloud.len()).filter(|i| !removed.contains(i)).collect();
    let reduced = cloud.subset(&kept);
    Ok((reduced, ExcisionMap { kept, removed: removed.into_iter().collect() }))
}

/// Brute-force recheck of an excision: sort every point by distance to each
/// residue, drop the `m` nearest per residue, and require `reduced` to be
/// exactly the remaining points in their original order.
pub fn verify_excision(full: &SurfacePointCloud, reduced: &SurfacePointCloud, residue_coords: &[Vec3], m: usize) -> Result<()> {
    let mut removed = vec![false; full.len()];
    for &r in residue_coords {
        let mut order: Vec<(f64, usize)> = full.points.iter().enumerate().map(|(j, &p)| (dist2(p, r), j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(m) {
            removed[j] = true;
        }
    }
    let expected: Vec<Vec3> = (0..full.len()).filter(|&j| !removed[j]).map(|j| full.points[j]).collect();
    if expected != reduced.points {
        let leaked = reduced.points.iter().filter(|p| !expected.contains(p)).count();
        return Err(Error::invalid(format!(
            "surface leakage: {leaked} excised points present, {} kept versus {} expected",
            reduced.len(),
            expected.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cloud(n: usize) -> SurfacePointCloud {
        SurfacePointCloud {
            points: (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(),
            normals: vec![[0.0, 0.0, 1.0]; n],
            features: (0..n).map(|i| i as f64 * 10.0).collect(),
            feature_dim: 1,
            source_protein: "line".into(),
        }
    }

    #[test]
    fn single_nearest_removed() {
        let (reduced, map) = excise_near_residue(&line_cloud(5), &[[2.2, 1.0, 0.0]], 1).unwrap();
        assert_eq!(map.removed, vec![2]);
        assert_eq!(map.kept, vec![0, 1, 3, 4]);
        assert_eq!(reduced.features, vec![0.0, 10.0, 30.0, 40.0]);
    }

    #[test]
    fn shared_neighbors_union() {
        let (_, map) = excise_near_residue(&line_cloud(10), &[[2.0, 0.1, 0.0], [2.0, -0.1, 0.0]], 3).unwrap();
        assert_eq!(map.removed, vec![1, 2, 3]);
        assert_eq!(map.kept.len() + map.removed.len(), 10);
    }

    #[test]
    fn emptying_rejected() {
        assert!(excise_near_residue(&line_cloud(3), &[[0.0; 3]], 3).is_err());
        let coords: Vec<Vec3> = (0..4).map(|i| [i as f64, 0.0, 0.0]).collect();
        assert!(excise_near_residue(&line_cloud(4), &coords, 1).is_err());
    }

    #[test]
    fn recheck_accepts_excision_and_flags_leaks() {
        let full = line_cloud(12);
        let sites = [[2.0, 0.3, 0.0], [9.0, 0.3, 0.0]];
        let (reduced, _) = excise_near_residue(&full, &sites, 2).unwrap();
        verify_excision(&full, &reduced, &sites, 2).unwrap();
        assert!(verify_excision(&full, &full, &sites, 2).is_err());
    }
}
