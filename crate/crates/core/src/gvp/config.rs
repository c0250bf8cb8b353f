use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::residue::NUM_RESIDUE_TYPES;

/// Which encoders run on top of the residue embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Structure graph only.
    S2f,
    /// Structure and surface graphs.
    #[default]
    S3f,
    /// Surface graph only; residue states skip message passing.
    SurfOnly,
}

impl Mode {
    pub fn uses_structure(self) -> bool {
        self != Mode::SurfOnly
    }

    pub fn uses_surface(self) -> bool {
        self != Mode::S2f
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::S2f => "s2f",
            Mode::S3f => "s3f",
            Mode::SurfOnly => "surf_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2f" => Ok(Mode::S2f),
            "s3f" => Ok(Mode::S3f),
            "surf_only" | "surf-only" => Ok(Mode::SurfOnly),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected s2f, s3f or surf_only)"))),
        }
    }
}

/// Source of the per-residue input features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    /// Precomputed, frozen embeddings of width `dim`.
    File { dim: usize },
    /// Learned residue-type table (plus a mask row) mixed over a window of
    /// half-width 2.
    Toy { dim: usize },
}

impl EmbedderSpec {
    pub fn dim(self) -> usize {
        match self {
            EmbedderSpec::File { dim } | EmbedderSpec::Toy { dim } => dim,
        }
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Toy { dim: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub mode: Mode,
    pub embedder: EmbedderSpec,
    pub scalar_dim: usize,
    pub vector_dim: usize,
    pub structure_layers: usize,
    pub surface_layers: usize,
    /// Hidden width of the two surface initialization perceptrons.
    pub init_hidden: usize,
    /// Structure graph cutoff, Å.
    pub radius: f64,
    pub rbf_kernels: usize,
    pub rbf_max: f64,
    pub surface_knn: usize,
    /// Residues averaged into each surface point at initialization.
    pub init_neighbors: usize,
    /// Surface points averaged into each residue after message passing.
    pub fuse_neighbors: usize,
    /// Surface points removed around every masked residue.
    pub excise_m: usize,
    pub surface_feature_dim: usize,
    /// Layer norm on scalars and norm rescaling on vectors before every block.
    pub normalize: bool,
    /// Fuse only the scalar track of the surface states into the residues.
    pub fuse_scalar_only: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::S3f,
            embedder: EmbedderSpec::default(),
            scalar_dim: 100,
            vector_dim: 16,
            structure_layers: 5,
            surface_layers: 5,
            init_hidden: 128,
            radius: 10.0,
            rbf_kernels: 16,
            rbf_max: 20.0,
            surface_knn: 16,
            init_neighbors: 3,
            fuse_neighbors: 20,
            excise_m: 20,
            surface_feature_dim: 5,
            normalize: true,
            fuse_scalar_only: false,
        }
    }
}

impl ModelConfig {
    /// Narrow, shallow network for single-core runs.
    pub fn desk() -> Self {
        ModelConfig {
            embedder: EmbedderSpec::Toy { dim: 16 },
            scalar_dim: 32,
            vector_dim: 8,
            structure_layers: 2,
            surface_layers: 2,
            init_hidden: 32,
            ..Default::default()
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.scalar_dim == 0 || self.vector_dim == 0 {
            return bad("hidden widths must be positive");
        }
        if self.embedder.dim() == 0 {
            return bad("embedding width must be positive");
        }
        if self.rbf_kernels < 2 || self.rbf_max <= 0.0 {
            return bad("need at least 2 RBF kernels over a positive range");
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if self.mode.uses_surface()
            && (self.init_hidden == 0
                || self.surface_knn == 0
                || self.init_neighbors == 0
                || self.fuse_neighbors == 0
                || self.excise_m == 0)
        {
            return bad("surface neighbor counts and widths must be positive");
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        NUM_RESIDUE_TYPES
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_widths() {
        let c = ModelConfig::default();
        assert_eq!((c.scalar_dim, c.vector_dim, c.structure_layers, c.surface_layers), (100, 16, 5, 5));
        assert_eq!((c.init_neighbors, c.surface_knn, c.fuse_neighbors, c.excise_m), (3, 16, 20, 20));
        assert_eq!(c.radius, 10.0);
    }

    #[test]
    fn mode_round_trip() {
        for m in [Mode::S2f, Mode::S3f, Mode::SurfOnly] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("s4f".parse::<Mode>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = ModelConfig::desk().with_mode(Mode::S2f);
        let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
