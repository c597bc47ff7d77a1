//! Single JSON document holding every tunable: detector thresholds, marker
//! lists, scope depth and corpus table options. Every section is optional.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ScopeRule, TableOptions};
use crate::detector::DetectorConfig;
use crate::dex::MarkerLists;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config detector: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub markers: MarkerLists,
    #[serde(default)]
    pub scope: ScopeRule,
    #[serde(default)]
    pub tables: TableOptions,
}

impl Config {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        cfg.detector.validate().map_err(ConfigError::Invalid)?;
        if cfg.scope.max_segments == 0 {
            return Err(ConfigError::Invalid("scope.max_segments must be at least 1".into()));
        }
        Ok(cfg)
    }
}
