//! Run configuration: a strict JSON document whose defaults match the
//! published operating point. Unknown keys are rejected so hyperparameter
//! typos fail loudly instead of silently running the defaults.

use serde::Deserialize;

use voxalign::csa::{BorderPolicy, CsaParams, GroupConfig, SemanticGroups};
use voxalign::error::{Error, Result};
use voxalign::grid::{ClassTable, GridDims, GridGeometry, ResolutionPair};
use voxalign::kittio::LabelMap;

fn default_w_e() -> f64 {
    0.1
}
fn default_w_v() -> f64 {
    0.3
}
fn default_alpha() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.5
}
fn default_theta() -> f64 {
    0.5
}
fn default_k() -> usize {
    4096
}
fn default_gamma() -> f64 {
    1.0
}
fn default_groups() -> GroupConfig {
    GroupConfig::C2
}
fn default_high_dims() -> GridDims {
    GridDims { x: 128, y: 128, z: 16 }
}
fn default_low_dims() -> GridDims {
    GridDims { x: 64, y: 64, z: 8 }
}
fn default_origin() -> [f64; 3] {
    [0.0, -25.6, -2.0]
}
fn default_extent() -> [f64; 3] {
    [51.2, 51.2, 6.4]
}
fn default_downscale() -> f64 {
    16.0
}
fn default_image_size() -> (u32, u32) {
    (1220, 370)
}

/// Toolkit configuration; every field has the published default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_w_e")]
    pub w_e: f64,
    #[serde(default = "default_w_v")]
    pub w_v: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub border_policy: BorderPolicy,
    /// Semantic grouping: "c0" | "c1" | "c2" | "c3" or {"custom": "<path>"}.
    #[serde(default = "default_groups")]
    pub groups: GroupConfig,
    /// Seed-selection confidence threshold.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Critical voxel count.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Circulated-loss weight.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_high_dims")]
    pub high_dims: GridDims,
    #[serde(default = "default_low_dims")]
    pub low_dims: GridDims,
    /// Minimum corner of the scene volume, meters.
    #[serde(default = "default_origin")]
    pub origin: [f64; 3],
    /// Metric extent of the scene volume, meters.
    #[serde(default = "default_extent")]
    pub extent: [f64; 3],
    /// Full-image pixels per 2D feature cell.
    #[serde(default = "default_downscale")]
    pub downscale: f64,
    /// Image size assumed when reading calibration text.
    #[serde(default = "default_image_size")]
    pub image_size: (u32, u32),
    /// Optional class-mapping JSON (raw ids -> training ids + names).
    #[serde(default)]
    pub class_map: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&std::path::Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_json(&std::fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    fn validate(&self) -> Result<()> {
        self.csa_params().validate()?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Validation(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::Validation("gamma must be nonnegative".into()));
        }
        if self.k == 0 {
            return Err(Error::Validation("k must be positive".into()));
        }
        self.resolution_pair()?;
        self.geometry_for(self.high_dims)?;
        Ok(())
    }

    pub fn csa_params(&self) -> CsaParams {
        CsaParams {
            w_e: self.w_e,
            w_v: self.w_v,
            alpha: self.alpha,
            beta: self.beta,
            border_policy: self.border_policy,
        }
    }

    pub fn resolution_pair(&self) -> Result<ResolutionPair> {
        ResolutionPair::infer(self.high_dims, self.low_dims)
    }

    /// Geometry of a grid spanning the configured volume at `dims`.
    /// The extent must give the same cubic voxel size on every axis.
    pub fn geometry_for(&self, dims: GridDims) -> Result<GridGeometry> {
        let sizes = [
            self.extent[0] / dims.x as f64,
            self.extent[1] / dims.y as f64,
            self.extent[2] / dims.z as f64,
        ];
        if (sizes[0] - sizes[1]).abs() > 1e-9 || (sizes[0] - sizes[2]).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "extent {:?} over dims {dims} does not give cubic voxels",
                self.extent
            )));
        }
        GridGeometry::new(dims, self.origin, sizes[0])
    }

    /// The class table: from the configured mapping file, or SemanticKITTI.
    pub fn class_table(&self) -> Result<ClassTable> {
        match &self.class_map {
            Some(path) => {
                let map = LabelMap::from_json(&std::fs::read_to_string(path)?)?;
                ClassTable::new(map.names)
            }
            None => Ok(ClassTable::semantic_kitti()),
        }
    }

    pub fn label_map(&self) -> Result<Option<LabelMap>> {
        match &self.class_map {
            Some(path) => Ok(Some(LabelMap::from_json(&std::fs::read_to_string(path)?)?)),
            None => Ok(None),
        }
    }

    /// The semantic grouping, loading custom mappings from disk.
    pub fn semantic_groups(&self, table: &ClassTable) -> Result<SemanticGroups> {
        match &self.groups {
            GroupConfig::Custom(path) => {
                SemanticGroups::from_json(&std::fs::read_to_string(path)?)
            }
            other => SemanticGroups::for_config(other, table),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_values() {
        let config = RunConfig::default();
        assert_eq!(config.w_e, 0.1);
        assert_eq!(config.w_v, 0.3);
        assert_eq!(config.alpha, 1.0);
        assert_eq!(config.beta, 0.5);
        assert_eq!(config.k, 4096);
        assert_eq!(config.gamma, 1.0);
        assert_eq!(config.theta, 0.5);
        assert_eq!(config.high_dims, GridDims { x: 128, y: 128, z: 16 });
        assert_eq!(config.low_dims, GridDims { x: 64, y: 64, z: 8 });
        let pair = config.resolution_pair().unwrap();
        assert_eq!(pair.lambda, 2);
        let geom = config.geometry_for(config.high_dims).unwrap();
        assert!((geom.voxel_size - 0.4).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"w_e": 0.1, "mystery": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"teta": 0.5}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"theta": 1.5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"gamma": -1.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"k": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"low_dims": {"x": 60, "y": 64, "z": 8}}"#).is_err());
    }

    #[test]
    fn group_choice_parses() {
        let config = RunConfig::from_json(r#"{"groups": "c0"}"#).unwrap();
        assert_eq!(config.groups, GroupConfig::C0);
        let config = RunConfig::from_json(r#"{"groups": {"custom": "g.json"}}"#).unwrap();
        assert!(matches!(config.groups, GroupConfig::Custom(_)));
    }
}
