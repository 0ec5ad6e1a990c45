//! Run configuration.
//!
//! A TOML file of dotted keys, e.g.
//!
//! ```toml
//! segmentation.threshold_mode = "otsu"   # otsu | fixed
//! segmentation.fixed_threshold = 0.5
//! segmentation.min_component_px = 20
//! segmentation.opening_radius = 1
//! graph.min_branch_length = 3.0
//! biomarkers.scale_factor = 1.0
//! quality.ssim.window = 11
//! quality.pcqi.stride = 4
//! quality.fid.grid = 4
//! quality.fid.embedding = "builtin"      # builtin | file:<path>
//! stats.ttest = "welch"                  # welch | student
//! stats.paired = false
//! ```
//!
//! Missing keys take their defaults; unknown keys are an error.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biomarkers::FeatureConfig;
use crate::imaging::SegmentationConfig;
use crate::quality::{PcqiParams, SsimParams};
use crate::stats::TTestKind;
use crate::vasculature::GraphConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiomarkerConfig {
    pub scale_factor: f64,
}

impl Default for BiomarkerConfig {
    fn default() -> Self {
        Self { scale_factor: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum EmbeddingSource {
    #[default]
    Builtin,
    File(PathBuf),
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingSource::Builtin => f.write_str("builtin"),
            EmbeddingSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl std::str::FromStr for EmbeddingSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "builtin" {
            Ok(EmbeddingSource::Builtin)
        } else if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                Err("embedding file path is empty".to_string())
            } else {
                Ok(EmbeddingSource::File(PathBuf::from(path)))
            }
        } else {
            Err(format!("expected `builtin` or `file:<path>`, got `{s}`"))
        }
    }
}

impl Serialize for EmbeddingSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for EmbeddingSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidConfig {
    pub grid: usize,
    pub embedding: EmbeddingSource,
}

impl Default for FidConfig {
    fn default() -> Self {
        Self {
            grid: 4,
            embedding: EmbeddingSource::Builtin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub ssim: SsimParams,
    pub pcqi: PcqiParams,
    pub fid: FidConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub ttest: TTestKind,
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub segmentation: SegmentationConfig,
    pub graph: GraphConfig,
    pub biomarkers: BiomarkerConfig,
    pub quality: QualityConfig,
    pub stats: StatsConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.quality
            .ssim
            .validate()
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.segmentation.fixed_threshold) {
            return Err(ConfigError::Parse(
                "segmentation.fixed_threshold must lie in [0, 1]".to_string(),
            ));
        }
        if self.quality.pcqi.window == 0 || self.quality.pcqi.stride == 0 {
            return Err(ConfigError::Parse(
                "quality.pcqi.window and stride must be positive".to_string(),
            ));
        }
        if self.quality.fid.grid == 0 {
            return Err(ConfigError::Parse(
                "quality.fid.grid must be positive".to_string(),
            ));
        }
        if !(self.biomarkers.scale_factor.is_finite() && self.biomarkers.scale_factor > 0.0) {
            return Err(ConfigError::Parse(
                "biomarkers.scale_factor must be positive".to_string(),
            ));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            segmentation: self.segmentation.clone(),
            graph: self.graph,
            scale_factor: self.biomarkers.scale_factor,
        }
    }

    /// Snapshot as TOML, embedded in reports.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
