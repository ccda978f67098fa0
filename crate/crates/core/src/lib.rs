//! Simulation of discretely observed jump diffusions
//! `dX = b(X) dt + σ(X) dW + ξ(X-) dL` and adaptive non-parametric estimation
//! of the drift `b` on a compact interval by penalized least squares over
//! dyadic spline spaces.
//!
//! The crate is organized bottom-up:
//!
//! - [`levy`]: jump measures and samplers for jump times and sizes;
//! - [`sde`]: Euler simulation with exact jump times, regression responses
//!   and their truncated variant;
//! - [`spline`]: the spline spaces `S_{m,r}` and their B-spline bases;
//! - [`estimator`]: least-squares fits and contrasts;
//! - [`selection`]: penalties, model collections, selection and calibration
//!   of the penalty constant;
//! - [`harness`]: Monte Carlo experiments and their CSV reports.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod interval;
pub mod io;
pub mod levy;
pub mod models;
pub mod sde;
pub mod seed;
pub mod selection;
pub mod spline;

pub use error::{Error, Result};
pub use estimator::{contrast_of, fit, gram_condition, DriftEstimate, NormalEquations};
pub use harness::{empirical_error, export_report, run_experiment, ExperimentConfig, ExperimentReport};
pub use interval::Interval;
pub use levy::{dyadic_to_compound, sample_jump_size, sample_jump_times, JumpLaw, JumpMeasure};
pub use models::{ModelConfig, Preset};
pub use sde::{
    responses, simulate_path, truncated_responses, truncation_threshold, CoefficientSet, EstimatorKind,
    ResponseSet, SimulationOptions, Trajectory,
};
pub use selection::{build_collection, calibrate_kappa, penalty, select, DimensionPolicy, PenaltySpec};
pub use spline::{nesting_check, ModelIndex, SplineSpace};
