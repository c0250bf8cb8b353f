use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gvp::ModelConfig;
use crate::scoring::GatingOptions;
use crate::surface::SurfaceConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_boot: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { n_boot: 10_000 }
    }
}

/// Fully resolved settings of one run. `seed` overrides the seeds of the
/// training and surface sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads (0: one per core).
    pub threads: usize,
    pub deterministic: bool,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub surface: SurfaceConfig,
    pub scoring: GatingOptions,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            deterministic: true,
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
            surface: SurfaceConfig::default(),
            scoring: GatingOptions::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Defaults overlaid with a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(format!("config file: {e}")))?;
        let mut base = serde_json::to_value(RunConfig::default())?;
        let over = serde_json::to_value(table).map_err(|e| Error::Config(format!("config file: {e}")))?;
        merge(&mut base, over);
        let cfg: RunConfig = serde_json::from_value(base).map_err(|e| Error::Config(format!("config file: {e}")))?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Push the global seed into the sections that draw random numbers and
    /// validate everything.
    pub fn finalize(mut self) -> Result<Self> {
        self.train.seed = self.seed;
        self.surface.seed = self.seed;
        self.model.validate()?;
        self.train.validate()?;
        self.surface.validate()?;
        if self.train.masking.excise_m != self.model.excise_m {
            self.train.masking.excise_m = self.model.excise_m;
        }
        Ok(self)
    }
}

/// Hex SHA-256 of the compact JSON of `value`.
pub fn config_hash(value: &impl Serialize) -> String {
    let json = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(&json))
}
