//! Penalized model selection over the dyadic spline collection, and the
//! simulation-based calibration of the penalty constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{DriftEstimate, NormalEquations};
use crate::interval::Interval;
use crate::levy::JumpMeasure;
use crate::sde::{responses, simulate_path, CoefficientSet, SimulationOptions};
use crate::seed::replication_seed;
use crate::spline::{ModelIndex, SplineSpace};

pub const DEFAULT_KAPPA: f64 = 2.0;
/// `2^5 + 3`.
pub const DEFAULT_MAX_DIMENSION: usize = 35;
pub const DEFAULT_MAX_FRACTION: f64 = 0.05;

/// Penalty `κ (σ₀² + ξ₀²) D / (nΔ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kappa: f64,
    /// `σ₀² + ξ₀²`.
    pub variance_scale: f64,
    pub n: usize,
    pub delta: f64,
}

impl PenaltySpec {
    pub fn new(kappa: f64, variance_scale: f64, n: usize, delta: f64) -> Result<Self> {
        let spec = Self {
            kappa,
            variance_scale,
            n,
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.variance_scale.is_finite() && self.variance_scale > 0.0) {
            return Err(invalid("penalty variance scale must be positive"));
        }
        if self.n == 0 || self.delta.is_nan() || self.delta <= 0.0 {
            return Err(invalid("penalty needs n >= 1 and delta > 0"));
        }
        Ok(())
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { kappa, ..*self }
    }

    pub fn of_dimension(&self, dimension: usize) -> f64 {
        self.kappa * self.variance_scale * dimension as f64 / (self.n as f64 * self.delta)
    }
}

/// `pen(m, r) = κ (σ₀² + ξ₀²) (2^m + r) / (nΔ)`.
pub fn penalty(index: ModelIndex, spec: &PenaltySpec) -> f64 {
    spec.of_dimension(index.dimension())
}

/// How the largest admissible dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DimensionPolicy {
    /// Largest `D` with `D^2 <= nΔ / ln^2(n)`.
    Theory,
    Fixed { value: usize },
}

impl Default for DimensionPolicy {
    fn default() -> Self {
        DimensionPolicy::Fixed {
            value: DEFAULT_MAX_DIMENSION,
        }
    }
}

impl DimensionPolicy {
    pub fn max_dimension(&self, n: usize, delta: f64) -> Result<usize> {
        match *self {
            DimensionPolicy::Fixed { value } => Ok(value),
            DimensionPolicy::Theory => {
                if n < 2 {
                    return Err(invalid("the theory bound needs n >= 2"));
                }
                let n = n as f64;
                Ok(((n * delta).sqrt() / n.ln()).floor() as usize)
            }
        }
    }
}

/// The admissible models `(m, r)` with `2^m + r <= D_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCollection {
    max_dimension: usize,
    /// Ascending degrees, each with its ascending levels.
    levels: Vec<(usize, Vec<u32>)>,
    /// Set when some degree had no admissible level and fell back to `m = 0`.
    fallback: bool,
}

impl ModelCollection {
    pub fn max_dimension(&self) -> usize {
        self.max_dimension
    }

    pub fn fallback(&self) -> bool {
        self.fallback
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels.iter().map(|(r, _)| *r)
    }

    pub fn levels(&self, degree: usize) -> &[u32] {
        self.levels
            .iter()
            .find(|(r, _)| *r == degree)
            .map(|(_, l)| l.as_slice())
            .unwrap_or(&[])
    }

    /// All models, degree by degree, levels ascending.
    pub fn models(&self) -> Vec<ModelIndex> {
        self.levels
            .iter()
            .flat_map(|(r, ms)| ms.iter().map(move |&m| ModelIndex::new(m, *r)))
            .collect()
    }

    /// Whether `index` sits at the finest level admitted for its degree.
    pub fn is_finest(&self, index: ModelIndex) -> bool {
        self.levels(index.degree).last() == Some(&index.level)
    }

    pub fn spaces(&self, interval: Interval) -> Result<Vec<SplineSpace>> {
        self.models()
            .into_iter()
            .map(|idx| SplineSpace::from_index(idx, interval))
            .collect()
    }
}

pub fn build_collection(n: usize, delta: f64, degrees: &[usize], policy: DimensionPolicy) -> Result<ModelCollection> {
    if n < 2 {
        return Err(invalid(format!("model collection needs n >= 2, got {n}")));
    }
    if degrees.is_empty() {
        return Err(invalid("at least one spline degree is required"));
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&r) = sorted.iter().find(|&&r| !(1..=3).contains(&r)) {
        return Err(invalid(format!("spline degree must be in 1..=3, got {r}")));
    }
    let max_dimension = policy.max_dimension(n, delta)?;
    let mut fallback = false;
    let levels = sorted
        .into_iter()
        .map(|r| {
            let mut ms: Vec<u32> = (0..=crate::spline::MAX_LEVEL)
                .take_while(|&m| (1usize << m) + r <= max_dimension)
                .collect();
            if ms.is_empty() {
                fallback = true;
                ms.push(0);
            }
            (r, ms)
        })
        .collect();
    Ok(ModelCollection {
        max_dimension,
        levels,
        fallback,
    })
}

/// What selection needs to know about each fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: ModelIndex,
    pub contrast: f64,
    pub usable: bool,
}

impl From<&DriftEstimate> for Candidate {
    fn from(e: &DriftEstimate) -> Self {
        Self {
            index: e.space.index(),
            contrast: e.contrast,
            usable: e.usable,
        }
    }
}

/// Outcome of the two-stage selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: ModelIndex,
    /// Position of the winner in the candidate list.
    pub position: usize,
    /// `contrast + pen` of the winner.
    pub criterion: f64,
}

/// `a` beats `b`: lower criterion, then smaller dimension, then smaller degree.
fn better(a: (f64, ModelIndex), b: (f64, ModelIndex)) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    let (da, db) = (a.1.dimension(), b.1.dimension());
    if da != db {
        return da < db;
    }
    a.1.degree < b.1.degree
}

/// Per degree, picks the level minimizing `contrast + pen` among usable
/// candidates; then picks the degree minimizing the same criterion among the
/// per-degree winners.
pub fn select_candidates(candidates: &[Candidate], spec: &PenaltySpec) -> Result<Selection> {
    let mut per_degree: Vec<(usize, Selection)> = Vec::new();
    for (position, c) in candidates.iter().enumerate() {
        if !c.usable || !c.contrast.is_finite() {
            continue;
        }
        let criterion = c.contrast + penalty(c.index, spec);
        let entry = Selection {
            index: c.index,
            position,
            criterion,
        };
        match per_degree.iter_mut().find(|(r, _)| *r == c.index.degree) {
            Some((_, best)) => {
                if better((criterion, c.index), (best.criterion, best.index)) {
                    *best = entry;
                }
            }
            None => per_degree.push((c.index.degree, entry)),
        }
    }
    per_degree
        .into_iter()
        .map(|(_, s)| s)
        .reduce(|best, s| {
            if better((s.criterion, s.index), (best.criterion, best.index)) {
                s
            } else {
                best
            }
        })
        .ok_or_else(|| Error::SelectionFailed("no usable estimate among the candidates".into()))
}

/// Selects among fitted estimates; returns the winner with its selection record.
pub fn select<'a>(estimates: &'a [DriftEstimate], spec: &PenaltySpec) -> Result<(Selection, &'a DriftEstimate)> {
    let candidates: Vec<Candidate> = estimates.iter().map(Candidate::from).collect();
    let selection = select_candidates(&candidates, spec)?;
    Ok((selection, &estimates[selection.position]))
}

/// Everything needed to simulate and fit one replication.
#[derive(Debug, Clone)]
pub struct CalibrationProblem<'a> {
    pub coeffs: &'a CoefficientSet,
    pub measure: &'a JumpMeasure,
    pub options: SimulationOptions,
    pub collection: &'a ModelCollection,
    pub interval: Interval,
    pub conditioning_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub kappa: f64,
    pub mean_dimension: f64,
    /// Fraction of replications selecting the finest usable level of the
    /// selected degree.
    pub frac_max_dimension: f64,
    /// Fraction of replications selecting the smallest usable dimension.
    pub frac_min_dimension: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub kappa: f64,
    pub rows: Vec<CalibrationRow>,
    /// No grid value met the criterion; `kappa` is the largest grid value.
    pub warning: bool,
    /// Replications dropped because simulation or selection failed.
    pub failed_replications: usize,
}

/// Chooses `κ` from `grid` by simulation.
///
/// Every replication is simulated once and fitted on all models with the
/// plain estimator; each grid value then selects on the same fits. The
/// calibrated value is the smallest `κ` whose fraction of replications
/// selecting the finest usable level of their degree falls below
/// `max_fraction`.
pub fn calibrate_kappa(
    problem: &CalibrationProblem<'_>,
    grid: &[f64],
    replications: usize,
    base_seed: u64,
    max_fraction: f64,
) -> Result<Calibration> {
    if grid.is_empty() {
        return Err(invalid("kappa grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(invalid("kappa grid must be positive and strictly increasing"));
    }
    if replications == 0 {
        return Err(invalid("calibration needs at least one replication"));
    }
    let spaces = problem.collection.spaces(problem.interval)?;
    let variance_scale = problem.coeffs.bounds().variance_scale();

    let fitted: Vec<Option<Vec<Candidate>>> = (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let seed = replication_seed(base_seed, i);
            let traj = simulate_path(problem.coeffs, problem.measure, &problem.options, seed).ok()?;
            let ys = responses(&traj);
            spaces
                .iter()
                .map(|space| {
                    NormalEquations::new(space, &traj, problem.conditioning_floor)
                        .solve(&ys)
                        .map(|e| Candidate::from(&e))
                        .ok()
                })
                .collect()
        })
        .collect();

    let base_spec = PenaltySpec::new(grid[0], variance_scale, problem.options.n, problem.options.delta)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut failed = 0;
    for (g, &kappa) in grid.iter().enumerate() {
        let spec = base_spec.with_kappa(kappa);
        let (mut total_dim, mut at_max, mut at_min, mut count) = (0usize, 0usize, 0usize, 0usize);
        for candidates in fitted.iter() {
            let Some(candidates) = candidates else {
                if g == 0 {
                    failed += 1;
                }
                continue;
            };
            let Ok(sel) = select_candidates(candidates, &spec) else {
                if g == 0 {
                    failed += 1;
                }
                continue;
            };
            let min_dim = candidates
                .iter()
                .filter(|c| c.usable)
                .map(|c| c.index.dimension())
                .min()
                .expect("selection succeeded so a usable candidate exists");
            let finest_usable = candidates
                .iter()
                .filter(|c| c.usable && c.index.degree == sel.index.degree)
                .map(|c| c.index.level)
                .max();
            count += 1;
            total_dim += sel.index.dimension();
            at_max += usize::from(finest_usable == Some(sel.index.level));
            at_min += usize::from(sel.index.dimension() == min_dim);
        }
        if count == 0 {
            return Err(Error::SelectionFailed("every calibration replication failed".into()));
        }
        rows.push(CalibrationRow {
            kappa,
            mean_dimension: total_dim as f64 / count as f64,
            frac_max_dimension: at_max as f64 / count as f64,
            frac_min_dimension: at_min as f64 / count as f64,
        });
    }

    let chosen = rows.iter().find(|row| row.frac_max_dimension < max_fraction);
    let (kappa, warning) = match chosen {
        Some(row) => (row.kappa, false),
        None => (*grid.last().expect("grid is non-empty"), true),
    };
    Ok(Calibration {
        kappa,
        rows,
        warning,
        failed_replications: failed,
    })
}
