//! Protein surface as a point cloud: level-set sampling of a smooth
//! distance field around the alpha carbons, per-point geometric features,
//! and removal of points near selected residues.

mod dump;
mod excise;
mod features;
mod field;
mod generate;
mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mat_vec, rigid_apply, Mat3, Vec3};

pub use dump::{parse_cloud_tsv, read_cloud, write_cloud, write_cloud_tsv};
pub use excise::{excise_near_residue, verify_excision, ExcisionMap};
pub use features::{gaussian_curvature, heat_kernel_signatures, standardize_columns, surface_features};
pub use field::{smooth_distance, smooth_distance_grad};
pub use generate::{build_surface, generate_surface, generate_surface_from_atoms};
pub use spectral::{lowest_laplacian_eigenpairs, Eigenpairs, DENSE_EIGEN_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceConfig {
    /// Effective radius of one alpha carbon, Å.
    pub atom_radius: f64,
    /// Temperature of the soft-min over atom distances.
    pub smoothing: f64,
    /// Field value sampled as the surface, as a multiple of `atom_radius`.
    pub level_scale: f64,
    pub seeds_per_atom: usize,
    /// Inclusive bounds on the emitted point count.
    pub target_points: (usize, usize),
    pub knn_k: usize,
    pub curvature_k: usize,
    pub hks_eigenpairs: usize,
    pub hks_times: Vec<f64>,
    /// Level-set residual accepted by the projection, Å.
    pub projection_tol: f64,
    pub max_newton_steps: usize,
    /// Upper bound on seeding rounds while the cloud is below its minimum size.
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            atom_radius: 3.0,
            smoothing: 1.0,
            level_scale: 1.0,
            seeds_per_atom: 20,
            target_points: (512, 4096),
            knn_k: 16,
            curvature_k: 12,
            hks_eigenpairs: 32,
            hks_times: vec![1.0, 10.0, 100.0, 1000.0],
            projection_tol: 1e-6,
            max_newton_steps: 50,
            max_rounds: 64,
            seed: 0,
        }
    }
}

impl SurfaceConfig {
    /// Point budget of full-size runs (6K to 20K points).
    pub fn full_scale() -> Self {
        SurfaceConfig { target_points: (6000, 20000), ..Default::default() }
    }

    pub fn level(&self) -> f64 {
        self.atom_radius * self.level_scale
    }

    /// Number of feature columns produced by [`surface_features`].
    pub fn feature_dim(&self) -> usize {
        1 + self.hks_times.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.target_points;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("surface: bad point range [{lo}, {hi}]")));
        }
        if self.seeds_per_atom == 0
            || self.knn_k == 0
            || self.curvature_k < 3
            || self.hks_eigenpairs == 0
            || self.max_newton_steps == 0
            || self.max_rounds == 0
        {
            return Err(Error::Config("surface: counts must be positive (curvature_k >= 3)".into()));
        }
        if !(self.atom_radius > 0.0 && self.smoothing > 0.0 && self.level_scale > 0.0) {
            return Err(Error::Config("surface: radius, smoothing and level must be positive".into()));
        }
        if !(self.projection_tol > 0.0 && self.projection_tol <= 1e-3) {
            return Err(Error::Config("surface: projection tolerance must be in (0, 1e-3]".into()));
        }
        Ok(())
    }
}

/// Sampled surface points with unit normals and per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Row-major `len() x feature_dim`.
    pub features: Vec<f64>,
    pub feature_dim: usize,
    pub source_protein: String,
}

impl SurfacePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn with_features(mut self, features: Vec<f64>, feature_dim: usize) -> Result<Self> {
        if features.len() != self.len() * feature_dim {
            return Err(Error::invalid(format!(
                "{} feature values for {} points of width {feature_dim}",
                features.len(),
                self.len()
            )));
        }
        self.features = features;
        self.feature_dim = feature_dim;
        Ok(self)
    }

    /// Keep the listed rows, in the given order.
    pub fn subset(&self, keep: &[usize]) -> SurfacePointCloud {
        let mut features = Vec::with_capacity(keep.len() * self.feature_dim);
        for &i in keep {
            features.extend_from_slice(self.feature_row(i));
        }
        SurfacePointCloud {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            normals: keep.iter().map(|&i| self.normals[i]).collect(),
            features,
            feature_dim: self.feature_dim,
            source_protein: self.source_protein.clone(),
        }
    }

    /// Apply a rigid motion to points and normals; features are unchanged.
    pub fn transformed(&self, rot: &Mat3, shift: Vec3) -> SurfacePointCloud {
        SurfacePointCloud {
            points: self.points.iter().map(|p| rigid_apply(rot, shift, *p)).collect(),
            normals: self.normals.iter().map(|n| mat_vec(rot, *n)).collect(),
            ..self.clone()
        }
    }
}
