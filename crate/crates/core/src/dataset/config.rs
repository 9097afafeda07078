use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::RansacParams;
use crate::augment::MotionAugConfig;
use crate::exposure_domain::ExposureThresholds;
use crate::flow::FlowParams;
use crate::imgcore::MetricConfig;
use crate::motion_domain::MotionConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// Every pipeline knob, read from a flat `key = value` file. Missing keys
/// take the defaults listed on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Patch side in pixels. Default 128.
    pub patch_size: usize,
    /// Grid stride in pixels. Default 64.
    pub stride: usize,
    /// Dominant flow magnitude gate in pixels. Default 15.
    pub t_f: f64,
    /// Minimum consistency PSNR of fused labels, dB. Default 45.
    pub consistency_db: f64,
    /// Under-exposure bound on gamma-encoded values. Default 0.125.
    pub t_low: f32,
    /// Over-exposure bound on gamma-encoded values. Default 0.75.
    pub t_high: f32,
    /// Fraction of pixels in range for a well-exposed patch. Default 0.5.
    pub well_exposed_fraction: f64,
    /// Donor saturation level. Default 0.98.
    pub sat_level: f32,
    /// Target saturated fraction is drawn uniformly from
    /// `[target_sat_min, target_sat_max]`. Defaults 0.25 and 0.75.
    pub target_sat_min: f64,
    pub target_sat_max: f64,
    /// Probability of a transfer mask when a donor exists. Default 0.5.
    pub transfer_probability: f64,
    /// Default 4.
    pub pseudo_static_sigma: f64,
    /// Default 20.
    pub free_moving_mean: f64,
    /// Default 3.
    pub free_moving_sigma: f64,
    /// Context around a patch available to augmentation. Default 32.
    pub aug_margin: usize,
    /// Apply pseudo-static shake to exposure-domain pairs. Default true.
    pub pseudo_static: bool,
    /// Emit free-moving EDM and MDM copies. Default true.
    pub free_moving: bool,
    /// Display gamma of the inputs. Default 2.2.
    pub gamma: f32,
    /// Default 5.
    pub flow_levels: usize,
    /// Default 10.
    pub flow_iterations: usize,
    /// Odd window side. Default 21.
    pub flow_window: usize,
    /// Default 2000.
    pub ransac_iterations: usize,
    /// Default 1.5.
    pub ransac_inlier_tol: f64,
    /// Default 100.
    pub ransac_min_correspondences: usize,
    /// Default 20000.
    pub ransac_max_correspondences: usize,
    /// Default 0.
    pub seed: u64,
    /// Worker threads; 0 uses every core. Default 0.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let th = ExposureThresholds::default();
        let aug = MotionAugConfig::default();
        let flow = FlowParams::default();
        let ransac = RansacParams::default();
        Self {
            patch_size: 128,
            stride: 64,
            t_f: 15.0,
            consistency_db: 45.0,
            t_low: th.t_low,
            t_high: th.t_high,
            well_exposed_fraction: th.well_exposed_fraction,
            sat_level: 0.98,
            target_sat_min: 0.25,
            target_sat_max: 0.75,
            transfer_probability: 0.5,
            pseudo_static_sigma: aug.pseudo_static_sigma,
            free_moving_mean: aug.free_moving_mean,
            free_moving_sigma: aug.free_moving_sigma,
            aug_margin: aug.margin,
            pseudo_static: true,
            free_moving: true,
            gamma: 2.2,
            flow_levels: flow.levels,
            flow_iterations: flow.iterations,
            flow_window: flow.window,
            ransac_iterations: ransac.iterations,
            ransac_inlier_tol: ransac.inlier_tol,
            ransac_min_correspondences: ransac.min_correspondences,
            ransac_max_correspondences: ransac.max_correspondences,
            seed: 0,
            workers: 0,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg()))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.patch_size >= 16, || {
            format!("patch_size {} < 16", self.patch_size)
        })?;
        check(self.stride > 0 && self.stride <= self.patch_size, || {
            format!("stride {} must lie in 1..={}", self.stride, self.patch_size)
        })?;
        check(self.t_f > 0.0, || format!("t_f {} must be positive", self.t_f))?;
        check(self.consistency_db.is_finite(), || {
            "consistency_db must be finite".into()
        })?;
        self.thresholds()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        check(self.sat_level > 0.0 && self.sat_level <= 1.0, || {
            format!("sat_level {} must lie in (0, 1]", self.sat_level)
        })?;
        check(
            self.target_sat_min > 0.0
                && self.target_sat_min <= self.target_sat_max
                && self.target_sat_max <= 1.0,
            || {
                format!(
                    "need 0 < target_sat_min <= target_sat_max <= 1, got {} and {}",
                    self.target_sat_min, self.target_sat_max
                )
            },
        )?;
        check((0.0..=1.0).contains(&self.transfer_probability), || {
            format!(
                "transfer_probability {} must lie in [0, 1]",
                self.transfer_probability
            )
        })?;
        self.aug()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        check(self.gamma > 0.0 && self.gamma.is_finite(), || {
            format!("gamma {} must be positive", self.gamma)
        })?;
        check(self.flow_levels >= 1, || "flow_levels must be at least 1".into())?;
        check(self.flow_iterations >= 1, || {
            "flow_iterations must be at least 1".into()
        })?;
        check(self.flow_window >= 3 && self.flow_window % 2 == 1, || {
            format!("flow_window {} must be odd and >= 3", self.flow_window)
        })?;
        check(self.ransac_iterations >= 1, || {
            "ransac_iterations must be at least 1".into()
        })?;
        check(self.ransac_inlier_tol > 0.0, || {
            "ransac_inlier_tol must be positive".into()
        })?;
        check(
            self.ransac_min_correspondences >= 4
                && self.ransac_min_correspondences <= self.ransac_max_correspondences,
            || "need 4 <= ransac_min_correspondences <= ransac_max_correspondences".into(),
        )?;
        Ok(())
    }

    pub fn thresholds(&self) -> ExposureThresholds {
        ExposureThresholds {
            t_low: self.t_low,
            t_high: self.t_high,
            well_exposed_fraction: self.well_exposed_fraction,
        }
    }

    pub fn aug(&self) -> MotionAugConfig {
        MotionAugConfig {
            pseudo_static_sigma: self.pseudo_static_sigma,
            free_moving_mean: self.free_moving_mean,
            free_moving_sigma: self.free_moving_sigma,
            margin: self.aug_margin,
        }
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            levels: self.flow_levels,
            iterations: self.flow_iterations,
            window: self.flow_window,
            ..FlowParams::default()
        }
    }

    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            iterations: self.ransac_iterations,
            inlier_tol: self.ransac_inlier_tol,
            min_correspondences: self.ransac_min_correspondences,
            max_correspondences: self.ransac_max_correspondences,
            ..RansacParams::default()
        }
    }

    pub fn motion(&self) -> MotionConfig {
        MotionConfig {
            patch_size: self.patch_size,
            stride: self.stride,
            t_f: self.t_f,
            consistency_db: self.consistency_db,
            thresholds: self.thresholds(),
            ransac: self.ransac(),
            metric: MetricConfig::default(),
            seed: self.seed,
        }
    }
}
