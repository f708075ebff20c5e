use std::path::Path;

use serde::{Deserialize, Serialize};

use carryscan_core::decision::DecisionPolicy;
use carryscan_core::error::ConfigError;
use carryscan_core::preprocess::PreprocessParams;
use carryscan_core::radar::{config_hash, ArrayGeometry, RadarConfig};
use carryscan_core::tracking::TrackerParams;
use carryscan_nn::train::TrainConfig;
use carryscan_nn::NetworkConfig;

use crate::dataset::DatasetConfig;

/// Everything one experiment needs, loaded from a single TOML file. Missing
/// sections fall back to their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub radar: RadarConfig,
    pub geometry: ArrayGeometry,
    pub preprocess: PreprocessParams,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub tracker: TrackerParams,
    pub decision: DecisionPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            radar: RadarConfig::default(),
            geometry: ArrayGeometry::default(),
            preprocess: PreprocessParams::default(),
            dataset: DatasetConfig::default(),
            network: NetworkConfig::reduced(),
            train: TrainConfig::default(),
            tracker: TrackerParams::default(),
            decision: DecisionPolicy::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.radar.validate()?;
        self.geometry.validate_for(&self.radar)?;
        let mut bad = Vec::new();
        if !self.decision.is_valid() {
            bad.push("decision: p_thr must lie in [0, 1] and n >= 1");
        }
        if !self.train.focal.is_valid() {
            bad.push("train.focal: weights must be positive and alpha non-negative");
        }
        if self.train.batch_size == 0 {
            bad.push("train.batch_size must be positive");
        }
        if self.network.input_dims != [self.preprocess.cube.range, self.preprocess.cube.azimuth, self.preprocess.cube.elevation] {
            bad.push("network.input_dims must equal the preprocess cube shape");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Parse(bad.join("; ")))
        }
    }

    /// Digest written into every frame, cube and model file.
    pub fn data_hash(&self) -> u64 {
        config_hash(&self.radar, &self.geometry)
    }
}
