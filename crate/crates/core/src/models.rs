//! Named coefficient functions and the four reference models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interval::Interval;
use crate::levy::{default_exponential_decay, default_stretched_scale, JumpLaw, JumpMeasure, DEFAULT_DYADIC_TRUNCATION};
use crate::sde::{Coefficient, CoefficientBounds, CoefficientSet, BOUND_CHECK_POINTS};

/// A coefficient function that can be written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `c[0] + c[1] x + c[2] x^2 + ...`
    Polynomial { coefficients: Vec<f64> },
    /// `-(x - 1/4)^3 - (x + 1/4)^3`
    DoubleWell,
    /// `-2x + sin(3x)`
    SineMeanReverting,
    /// `sqrt((3 + x^2) / (1 + x^2))`
    RationalVolatility,
}

impl FunctionSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Constant { value } => *value,
            FunctionSpec::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
            FunctionSpec::DoubleWell => -(x - 0.25).powi(3) - (x + 0.25).powi(3),
            FunctionSpec::SineMeanReverting => -2.0 * x + (3.0 * x).sin(),
            FunctionSpec::RationalVolatility => ((3.0 + x * x) / (1.0 + x * x)).sqrt(),
        }
    }

    pub fn to_coefficient(&self) -> Coefficient {
        let spec = self.clone();
        Arc::new(move |x| spec.eval(x))
    }
}

/// The reference models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Ornstein–Uhlenbeck drift with `±1` jumps.
    Model1,
    /// Double-well drift with Laplace jumps.
    Model2,
    /// Sine-perturbed drift with stretched-exponential jumps.
    Model3,
    /// Ornstein–Uhlenbeck drift driven by the dyadic infinite-activity measure.
    Model4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Model1, Preset::Model2, Preset::Model3, Preset::Model4];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Model1 => "model1",
            Preset::Model2 => "model2",
            Preset::Model3 => "model3",
            Preset::Model4 => "model4",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn spec(&self) -> ModelSpec {
        let ou = FunctionSpec::Polynomial {
            coefficients: vec![0.0, -2.0],
        };
        let one = FunctionSpec::Constant { value: 1.0 };
        let unit_bounds = Some(VolatilityBounds {
            sigma_upper: 1.0,
            sigma_lower: 1.0,
            xi_upper: 1.0,
        });
        match self {
            Preset::Model1 => ModelSpec {
                drift: ou,
                diffusion: one.clone(),
                jump_coefficient: one,
                jumps: JumpMeasure::CompoundPoisson {
                    intensity: 1.0,
                    law: JumpLaw::TwoPoint,
                },
                b_max: None,
                volatility: unit_bounds,
            },
            Preset::Model2 => {
                // ν(dz) = exp(-λ|z|) dz / 2 has mass 1/λ: a Laplace law at rate 1/λ.
                let decay = default_exponential_decay();
                ModelSpec {
                    drift: FunctionSpec::DoubleWell,
                    diffusion: one.clone(),
                    jump_coefficient: one,
                    jumps: JumpMeasure::CompoundPoisson {
                        intensity: 1.0 / decay,
                        law: JumpLaw::SymmetricExponential { decay },
                    },
                    b_max: None,
                    volatility: unit_bounds,
                }
            }
            Preset::Model3 => ModelSpec {
                drift: FunctionSpec::SineMeanReverting,
                diffusion: FunctionSpec::RationalVolatility,
                jump_coefficient: FunctionSpec::RationalVolatility,
                jumps: JumpMeasure::CompoundPoisson {
                    intensity: 1.0,
                    law: JumpLaw::StretchedExponential {
                        scale: default_stretched_scale(),
                    },
                },
                b_max: None,
                // (3 + x^2) / (1 + x^2) lies in (1, 3] on the whole line.
                volatility: Some(VolatilityBounds {
                    sigma_upper: 3f64.sqrt(),
                    sigma_lower: 1.0,
                    xi_upper: 3f64.sqrt(),
                }),
            },
            Preset::Model4 => ModelSpec {
                drift: ou,
                diffusion: one.clone(),
                jump_coefficient: one,
                jumps: JumpMeasure::DyadicSeries {
                    truncation: DEFAULT_DYADIC_TRUNCATION,
                    residual_gaussian: false,
                },
                b_max: None,
                volatility: unit_bounds,
            },
        }
    }
}

/// Bounds on `σ` and `ξ`, independent of the estimation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityBounds {
    pub sigma_upper: f64,
    pub sigma_lower: f64,
    pub xi_upper: f64,
}

/// An explicit model: coefficient functions, jump measure and optional bounds.
/// Missing bounds are replaced by grid suprema over the estimation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub drift: FunctionSpec,
    pub diffusion: FunctionSpec,
    pub jump_coefficient: FunctionSpec,
    pub jumps: JumpMeasure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volatility: Option<VolatilityBounds>,
}

impl ModelSpec {
    pub fn coefficients(&self, interval: Interval) -> Result<CoefficientSet> {
        let drift = self.drift.to_coefficient();
        let diffusion = self.diffusion.to_coefficient();
        let jump = self.jump_coefficient.to_coefficient();
        let grid = CoefficientBounds::from_grid(&*drift, &*diffusion, &*jump, interval, BOUND_CHECK_POINTS);
        let vol = self.volatility.unwrap_or(VolatilityBounds {
            sigma_upper: grid.sigma_upper,
            sigma_lower: grid.sigma_lower,
            xi_upper: grid.xi_upper,
        });
        let bounds = CoefficientBounds {
            b_max: self.b_max.unwrap_or(grid.b_max),
            sigma_upper: vol.sigma_upper,
            sigma_lower: vol.sigma_lower,
            xi_upper: vol.xi_upper,
        };
        CoefficientSet::new(drift, diffusion, jump, bounds, interval)
    }
}

/// Model section of a config: a preset, optionally with its jump measure
/// replaced, or an explicit specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ModelConfig {
    Preset {
        preset: Preset,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        jumps: Option<JumpMeasure>,
    },
    Explicit(ModelSpec),
}

impl ModelConfig {
    pub fn preset(preset: Preset) -> Self {
        ModelConfig::Preset { preset, jumps: None }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            ModelConfig::Preset { preset, jumps } => {
                let mut spec = preset.spec();
                if let Some(j) = jumps {
                    spec.jumps = j.clone();
                }
                spec
            }
            ModelConfig::Explicit(spec) => spec.clone(),
        }
    }

    /// Coefficients and validated jump measure.
    pub fn resolve(&self, interval: Interval) -> Result<(CoefficientSet, JumpMeasure)> {
        let spec = self.spec();
        spec.jumps.validate()?;
        Ok((spec.coefficients(interval)?, spec.jumps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_bounds() {
        let a = Interval::unit();
        let (m1, j1) = ModelConfig::preset(Preset::Model1).resolve(a).unwrap();
        assert_eq!(m1.bounds().b_max, 2.0);
        assert_eq!(m1.bounds().variance_scale(), 2.0);
        assert_eq!(j1.second_moment(), 1.0);

        let (m2, j2) = ModelConfig::preset(Preset::Model2).resolve(a).unwrap();
        assert!((m2.bounds().b_max - 2.375).abs() < 1e-12);
        assert!((j2.second_moment() - 1.0).abs() < 1e-12);

        let (m3, j3) = ModelConfig::preset(Preset::Model3).resolve(a).unwrap();
        assert!((m3.bounds().variance_scale() - 6.0).abs() < 1e-12);
        assert!((m3.bounds().b_max - (2.0 - 3f64.sin())).abs() < 1e-12);
        assert!((j3.second_moment() - 1.0).abs() < 1e-12);

        let (_, j4) = ModelConfig::preset(Preset::Model4).resolve(a).unwrap();
        assert!((j4.second_moment() - (16.0 - 2f64.powi(-7))).abs() < 1e-12);
        assert_eq!(j4.blumenthal_getoor_index(), 1.0);
    }

    #[test]
    fn function_specs() {
        let p = FunctionSpec::Polynomial {
            coefficients: vec![1.0, -2.0, 3.0],
        };
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(FunctionSpec::DoubleWell.eval(0.0), 0.0);
        assert!((FunctionSpec::RationalVolatility.eval(0.0) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(FunctionSpec::SineMeanReverting.eval(0.0), 0.0);
    }

    #[test]
    fn explicit_model_uses_grid_bounds() {
        let spec = ModelSpec {
            drift: FunctionSpec::Polynomial {
                coefficients: vec![0.5, -1.0],
            },
            diffusion: FunctionSpec::Constant { value: 0.5 },
            jump_coefficient: FunctionSpec::Constant { value: 0.0 },
            jumps: JumpMeasure::NoJumps,
            b_max: None,
            volatility: None,
        };
        let (c, _) = ModelConfig::Explicit(spec).resolve(Interval::unit()).unwrap();
        assert_eq!(c.bounds().b_max, 1.5);
        assert_eq!(c.bounds().sigma_upper, 0.5);
        assert_eq!(c.bounds().xi_upper, 0.0);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::parse(p.name()), Some(p));
        }
        assert_eq!(Preset::parse("model5"), None);
    }
}
