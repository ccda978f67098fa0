use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::DEFAULT_CONDITIONING_FLOOR;
use crate::interval::Interval;
use crate::models::{ModelConfig, Preset};
use crate::sde::SimulationOptions;
use crate::selection::{DimensionPolicy, DEFAULT_KAPPA, DEFAULT_MAX_FRACTION};

pub const DEFAULT_CURVE_POINTS: usize = 512;

/// Penalty constant: a number or `"calibrate"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSetting {
    Fixed(f64),
    Calibrate(CalibrateKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrateKeyword {
    Calibrate,
}

impl Default for KappaSetting {
    fn default() -> Self {
        KappaSetting::Fixed(DEFAULT_KAPPA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default)]
    pub kappa: KappaSetting,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub max_dimension: DimensionPolicy,
    #[serde(default)]
    pub interval: Interval,
    #[serde(default = "default_floor")]
    pub conditioning_floor: f64,
}

fn default_degrees() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_floor() -> f64 {
    DEFAULT_CONDITIONING_FLOOR
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            kappa: KappaSetting::default(),
            degrees: default_degrees(),
            max_dimension: DimensionPolicy::default(),
            interval: Interval::unit(),
            conditioning_floor: default_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_calibration_replications")]
    pub replications: usize,
    /// Largest tolerated fraction of replications selecting the finest level.
    #[serde(default = "default_max_fraction")]
    pub max_fraction: f64,
}

fn default_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
}

fn default_calibration_replications() -> usize {
    50
}

fn default_max_fraction() -> f64 {
    DEFAULT_MAX_FRACTION
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            replications: default_calibration_replications(),
            max_fraction: default_max_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Write `curve_<seed>_<kind>.csv` for every replication.
    #[serde(default = "default_true")]
    pub curves: bool,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_true() -> bool {
    true
}

fn default_curve_points() -> usize {
    DEFAULT_CURVE_POINTS
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            curves: true,
            curve_points: DEFAULT_CURVE_POINTS,
        }
    }
}

/// A full Monte Carlo experiment, stored as TOML.
///
/// ```toml
/// replications = 50
/// seed = 1
///
/// [model]
/// preset = "model1"
///
/// [simulation]
/// n = 10000
/// delta = 0.1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub simulation: SimulationOptions,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn new(preset: Preset, n: usize, delta: f64, replications: usize, seed: u64) -> Self {
        Self {
            replications,
            seed,
            model: ModelConfig::preset(preset),
            simulation: SimulationOptions::new(n, delta),
            estimation: EstimationConfig::default(),
            calibration: CalibrationConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.simulation.n < 2 {
            return Err(invalid("simulation.n must be at least 2"));
        }
        self.simulation.validate()?;
        if let KappaSetting::Fixed(k) = self.estimation.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(invalid(format!("kappa must be positive, got {k}")));
            }
        }
        if self.estimation.conditioning_floor.is_nan() || self.estimation.conditioning_floor < 0.0 {
            return Err(invalid("conditioning_floor must be non-negative"));
        }
        if self.output.curve_points < 2 {
            return Err(invalid("curve_points must be at least 2"));
        }
        if !(self.calibration.max_fraction > 0.0 && self.calibration.max_fraction <= 1.0) {
            return Err(invalid("calibration.max_fraction must lie in (0, 1]"));
        }
        if self.calibration.replications == 0 {
            return Err(invalid("calibration.replications must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_toml()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
