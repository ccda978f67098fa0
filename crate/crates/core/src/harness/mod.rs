//! Monte Carlo driver: simulate, fit both estimators on the whole model
//! collection, select adaptively, and compare with the best model in
//! hindsight.

mod config;

use std::path::Path;

use rayon::prelude::*;

pub use config::{
    CalibrateKeyword, CalibrationConfig, EstimationConfig, ExperimentConfig, KappaSetting, OutputConfig,
    DEFAULT_CURVE_POINTS,
};

use crate::error::{Error, Result};
use crate::estimator::{DriftEstimate, NormalEquations};
use crate::interval::Interval;
use crate::io::{write_curve_csv, write_lines};
use crate::levy::JumpMeasure;
use crate::sde::{
    responses, simulate_path, truncated_responses, truncation_threshold, CoefficientSet, EstimatorKind, ResponseSet,
    Trajectory,
};
use crate::seed::{domain_seed, replication_seed};
use crate::selection::{
    build_collection, calibrate_kappa, select, Calibration, CalibrationProblem, ModelCollection, PenaltySpec,
};
use crate::spline::SplineSpace;

/// `‖t - b_A‖_n^2 = (1/n) sum_{k : X_k ∈ A} (t(X_k) - b(X_k))^2`.
pub fn empirical_error(
    estimate: &DriftEstimate,
    traj: &Trajectory,
    b_true: &dyn Fn(f64) -> f64,
    interval: Interval,
) -> f64 {
    let sum: f64 = traj
        .design()
        .iter()
        .filter(|&&x| interval.contains(x))
        .map(|&x| (estimate.eval(x) - b_true(x)).powi(2))
        .sum();
    sum / traj.n() as f64
}

/// Fits every space of a collection to one response set.
pub fn fit_collection(
    spaces: &[SplineSpace],
    traj: &Trajectory,
    responses: &ResponseSet,
    floor: f64,
) -> Result<Vec<DriftEstimate>> {
    spaces
        .iter()
        .map(|space| NormalEquations::new(space, traj, floor).solve(responses))
        .collect()
}

/// Outcome of one estimator kind in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindOutcome {
    pub level: u32,
    pub degree: usize,
    pub err: f64,
    pub emin: f64,
    pub oracle: f64,
}

/// One replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub plain: KindOutcome,
    pub truncated: KindOutcome,
    /// Increments from points in `A` removed by the threshold.
    pub truncation_count: usize,
    /// Design points in `A`.
    pub in_interval: usize,
    /// Selected curves on the report grid: (plain, truncated).
    pub curves: Option<(Vec<f64>, Vec<f64>)>,
}

/// A replication left out of the aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedReplication {
    pub replication: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindAggregate {
    pub mean_level: f64,
    pub mean_degree: f64,
    /// Mean of `err`.
    pub risk: f64,
    pub median_err: f64,
    /// Mean of `oracle`.
    pub mean_oracle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub included: usize,
    pub excluded: usize,
    pub plain: KindAggregate,
    pub truncated: KindAggregate,
}

impl Aggregates {
    pub fn from_rows(rows: &[ReplicationRow], excluded: usize) -> Self {
        let kind = |pick: fn(&ReplicationRow) -> &KindOutcome| {
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&KindOutcome) -> f64| rows.iter().map(|r| f(pick(r))).sum::<f64>() / n;
            let mut errs: Vec<f64> = rows.iter().map(|r| pick(r).err).collect();
            KindAggregate {
                mean_level: mean(&|o| o.level as f64),
                mean_degree: mean(&|o| o.degree as f64),
                risk: mean(&|o| o.err),
                median_err: median(&mut errs),
                mean_oracle: mean(&|o| o.oracle),
            }
        };
        Self {
            included: rows.len(),
            excluded,
            plain: kind(|r| &r.plain),
            truncated: kind(|r| &r.truncated),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReplicationRow>,
    pub excluded: Vec<ExcludedReplication>,
    pub aggregates: Aggregates,
    pub kappa: f64,
    pub calibration: Option<Calibration>,
    /// Truncation threshold `C_Δ`.
    pub threshold: f64,
    pub collection_fallback: bool,
    /// Curve grid over `A` and the true drift on it.
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Shared, read-only inputs of every replication.
struct Plan<'a> {
    coeffs: &'a CoefficientSet,
    measure: &'a JumpMeasure,
    config: &'a ExperimentConfig,
    spaces: Vec<SplineSpace>,
    penalty: PenaltySpec,
    threshold: f64,
    interval: Interval,
    grid: Vec<f64>,
}

enum Outcome {
    Row(ReplicationRow),
    Excluded(ExcludedReplication),
}

impl Plan<'_> {
    fn replication(&self, index: usize) -> Outcome {
        let seed = replication_seed(self.config.seed, index as u64);
        match self.try_replication(index, seed) {
            Ok(row) => Outcome::Row(row),
            Err(e) => Outcome::Excluded(ExcludedReplication {
                replication: index,
                seed,
                reason: format!("{}: {e}", e.kind()),
            }),
        }
    }

    fn try_replication(&self, index: usize, seed: u64) -> Result<ReplicationRow> {
        let traj = simulate_path(self.coeffs, self.measure, &self.config.simulation, seed)?;
        let plain = responses(&traj);
        let trunc = truncated_responses(&traj, self.threshold, self.interval)?;
        let floor = self.config.estimation.conditioning_floor;

        let mut plain_fits = Vec::with_capacity(self.spaces.len());
        let mut trunc_fits = Vec::with_capacity(self.spaces.len());
        for space in &self.spaces {
            let normal = NormalEquations::new(space, &traj, floor);
            plain_fits.push(normal.solve(&plain)?);
            trunc_fits.push(normal.solve(&trunc)?);
        }
        let b = self.coeffs.drift_fn();
        let outcome = |fits: &[DriftEstimate]| -> Result<(KindOutcome, usize)> {
            let errors: Vec<f64> = fits.iter().map(|e| empirical_error(e, &traj, &**b, self.interval)).collect();
            let (selection, _) = select(fits, &self.penalty)?;
            let err = errors[selection.position];
            let emin = fits
                .iter()
                .zip(&errors)
                .filter(|(e, _)| e.usable)
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min);
            let oracle = if emin > 0.0 {
                err / emin
            } else if err == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            let o = KindOutcome {
                level: selection.index.level,
                degree: selection.index.degree,
                err,
                emin,
                oracle,
            };
            Ok((o, selection.position))
        };
        let (plain_outcome, plain_pos) = outcome(&plain_fits)?;
        let (trunc_outcome, trunc_pos) = outcome(&trunc_fits)?;
        let curves = self.config.output.curves.then(|| {
            let curve = |e: &DriftEstimate| self.grid.iter().map(|&x| e.eval(x)).collect::<Vec<f64>>();
            (curve(&plain_fits[plain_pos]), curve(&trunc_fits[trunc_pos]))
        });
        Ok(ReplicationRow {
            replication: index,
            seed,
            plain: plain_outcome,
            truncated: trunc_outcome,
            truncation_count: trunc.truncated_count(),
            in_interval: traj.count_in(self.interval),
            curves,
        })
    }
}

/// Problem description used by `calibrate_kappa` for a config.
pub fn calibration_problem<'a>(
    config: &ExperimentConfig,
    coeffs: &'a CoefficientSet,
    measure: &'a JumpMeasure,
    collection: &'a ModelCollection,
) -> CalibrationProblem<'a> {
    CalibrationProblem {
        coeffs,
        measure,
        options: config.simulation,
        collection,
        interval: config.estimation.interval,
        conditioning_floor: config.estimation.conditioning_floor,
    }
}

/// Runs the calibration described by the config's `[calibration]` section.
///
/// Calibration replications use the base seed `domain_seed(seed, "calibration")`,
/// disjoint from the experiment's own replications.
pub fn run_calibration(config: &ExperimentConfig) -> Result<Calibration> {
    config.validate()?;
    let interval = config.estimation.interval;
    let (coeffs, measure) = config.model.resolve(interval)?;
    let collection = build_collection(
        config.simulation.n,
        config.simulation.delta,
        &config.estimation.degrees,
        config.estimation.max_dimension,
    )?;
    let problem = calibration_problem(config, &coeffs, &measure, &collection);
    calibrate_kappa(
        &problem,
        &config.calibration.grid,
        config.calibration.replications,
        domain_seed(config.seed, "calibration"),
        config.calibration.max_fraction,
    )
}

/// Runs every replication of the experiment.
///
/// Replication `i` uses `replication_seed(seed, i)`; replications run in
/// parallel and the report is assembled in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let interval = config.estimation.interval;
    let (coeffs, measure) = config.model.resolve(interval)?;
    let sim = &config.simulation;
    let collection = build_collection(sim.n, sim.delta, &config.estimation.degrees, config.estimation.max_dimension)?;

    let (kappa, calibration) = match config.estimation.kappa {
        KappaSetting::Fixed(k) => (k, None),
        KappaSetting::Calibrate(_) => {
            let problem = calibration_problem(config, &coeffs, &measure, &collection);
            let cal = calibrate_kappa(
                &problem,
                &config.calibration.grid,
                config.calibration.replications,
                domain_seed(config.seed, "calibration"),
                config.calibration.max_fraction,
            )?;
            (cal.kappa, Some(cal))
        }
    };

    let grid = interval.grid(config.output.curve_points);
    let truth = grid.iter().map(|&x| coeffs.drift(x)).collect();
    let plan = Plan {
        coeffs: &coeffs,
        measure: &measure,
        config,
        spaces: collection.spaces(interval)?,
        penalty: PenaltySpec::new(kappa, coeffs.bounds().variance_scale(), sim.n, sim.delta)?,
        threshold: truncation_threshold(&coeffs, sim.delta, sim.n)?,
        interval,
        grid,
    };

    let outcomes: Vec<Outcome> = (0..config.replications)
        .into_par_iter()
        .map(|i| plan.replication(i))
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Row(r) => rows.push(r),
            Outcome::Excluded(e) => excluded.push(e),
        }
    }
    let aggregates = Aggregates::from_rows(&rows, excluded.len());
    Ok(ExperimentReport {
        rows,
        excluded,
        aggregates,
        kappa,
        calibration,
        threshold: plan.threshold,
        collection_fallback: collection.fallback(),
        grid: plan.grid,
        truth,
    })
}

pub const ROWS_HEADER: &str = "replication,seed,m1,r1,err1,emin1,oracle1,m2,r2,err2,emin2,oracle2,truncated,in_a";
pub const AGGREGATES_HEADER: &str = "included,excluded,kappa,threshold,m1_mean,r1_mean,risk1,risk1_median,or1,\
m2_mean,r2_mean,risk2,risk2_median,or2";
pub const CALIBRATION_HEADER: &str = "kappa,mean_D,frac_max_D";

fn row_line(r: &ReplicationRow) -> String {
    let (p, t) = (&r.plain, &r.truncated);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.replication,
        r.seed,
        p.level,
        p.degree,
        p.err,
        p.emin,
        p.oracle,
        t.level,
        t.degree,
        t.err,
        t.emin,
        t.oracle,
        r.truncation_count,
        r.in_interval
    )
}

/// Writes `kappa,mean_D,frac_max_D` rows.
pub fn write_calibration_csv(calibration: &Calibration, path: &Path) -> Result<()> {
    write_lines(
        path,
        CALIBRATION_HEADER,
        calibration
            .rows
            .iter()
            .map(|row| format!("{},{},{}", row.kappa, row.mean_dimension, row.frac_max_dimension)),
    )
}

/// Writes `rows.csv`, `aggregates.csv`, `excluded.csv`, the calibration
/// table if one was run, and curve files for rows that carry curves.
pub fn export_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_lines(&dir.join("rows.csv"), ROWS_HEADER, report.rows.iter().map(row_line))?;
    let a = &report.aggregates;
    let agg = format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        a.included,
        a.excluded,
        report.kappa,
        report.threshold,
        a.plain.mean_level,
        a.plain.mean_degree,
        a.plain.risk,
        a.plain.median_err,
        a.plain.mean_oracle,
        a.truncated.mean_level,
        a.truncated.mean_degree,
        a.truncated.risk,
        a.truncated.median_err,
        a.truncated.mean_oracle
    );
    write_lines(&dir.join("aggregates.csv"), AGGREGATES_HEADER, [agg])?;
    write_lines(
        &dir.join("excluded.csv"),
        "replication,seed,reason",
        report
            .excluded
            .iter()
            .map(|e| format!("{},{},\"{}\"", e.replication, e.seed, e.reason.replace('"', "'"))),
    )?;
    if let Some(cal) = &report.calibration {
        write_calibration_csv(cal, &dir.join("calibration.csv"))?;
    }
    for row in &report.rows {
        if let Some((plain, trunc)) = &row.curves {
            for (kind, values) in [(EstimatorKind::Plain, plain), (EstimatorKind::Truncated, trunc)] {
                let path = dir.join(format!("curve_{}_{}.csv", row.seed, kind));
                write_curve_csv(&path, &report.grid, &[("bhat", values), ("btrue", &report.truth)])?;
            }
        }
    }
    Ok(())
}
