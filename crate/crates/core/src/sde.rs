//! Euler simulation of `dX = b(X) dt + σ(X) dW + ξ(X-) dL` observed on a
//! regular grid, and the regression responses built from the increments.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::Interval;
use crate::levy::{JumpLaw, JumpMeasure, JumpSampler, PoissonClock};

/// A real function of the state.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of grid points used to spot-check coefficient bounds on `A`.
pub const BOUND_CHECK_POINTS: usize = 1000;

/// Bounds on the coefficients over the estimation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    /// `sup_A |b|`.
    pub b_max: f64,
    /// Upper bound `σ₀` of `σ`.
    pub sigma_upper: f64,
    /// Lower bound `σ₁` of `σ`.
    pub sigma_lower: f64,
    /// Upper bound `ξ₀` of `ξ`.
    pub xi_upper: f64,
}

impl CoefficientBounds {
    /// Suprema and infima observed on a uniform grid over `interval`.
    pub fn from_grid(
        drift: &dyn Fn(f64) -> f64,
        diffusion: &dyn Fn(f64) -> f64,
        jump: &dyn Fn(f64) -> f64,
        interval: Interval,
        points: usize,
    ) -> Self {
        let grid = interval.grid(points.max(2));
        let fold = |f: &dyn Fn(f64) -> f64| {
            grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY, 0.0f64), |(lo, hi, abs), &x| {
                let v = f(x);
                (lo.min(v), hi.max(v), abs.max(v.abs()))
            })
        };
        let (_, _, b_max) = fold(drift);
        let (sigma_lower, sigma_upper, _) = fold(diffusion);
        let (_, xi_upper, _) = fold(jump);
        Self {
            b_max,
            sigma_upper,
            sigma_lower,
            xi_upper: xi_upper.max(0.0),
        }
    }

    /// `σ₀² + ξ₀²`, the variance scale of the penalty.
    pub fn variance_scale(&self) -> f64 {
        self.sigma_upper * self.sigma_upper + self.xi_upper * self.xi_upper
    }
}

/// The coefficients `(b, σ, ξ)` with their bounds on `A`.
#[derive(Clone)]
pub struct CoefficientSet {
    drift: Coefficient,
    diffusion: Coefficient,
    jump: Coefficient,
    bounds: CoefficientBounds,
    interval: Interval,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("bounds", &self.bounds)
            .field("interval", &self.interval)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// Builds the set and checks the bounds on a grid of `BOUND_CHECK_POINTS`
    /// points over `interval`: `0 < σ₁ <= σ <= σ₀`, `0 <= ξ <= ξ₀` and
    /// `|b| <= b_max`.
    pub fn new(
        drift: Coefficient,
        diffusion: Coefficient,
        jump: Coefficient,
        bounds: CoefficientBounds,
        interval: Interval,
    ) -> Result<Self> {
        let set = Self::unchecked(drift, diffusion, jump, bounds, interval);
        set.validate()?;
        Ok(set)
    }

    /// Builds the set without bound checks, e.g. for degenerate dynamics.
    pub fn unchecked(
        drift: Coefficient,
        diffusion: Coefficient,
        jump: Coefficient,
        bounds: CoefficientBounds,
        interval: Interval,
    ) -> Self {
        Self {
            drift,
            diffusion,
            jump,
            bounds,
            interval,
        }
    }

    /// Builds the set with bounds taken from grid suprema over `interval`.
    pub fn with_grid_bounds(
        drift: Coefficient,
        diffusion: Coefficient,
        jump: Coefficient,
        interval: Interval,
    ) -> Result<Self> {
        let bounds =
            CoefficientBounds::from_grid(&*drift, &*diffusion, &*jump, interval, BOUND_CHECK_POINTS);
        Self::new(drift, diffusion, jump, bounds, interval)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.sigma_lower > 0.0 && b.sigma_lower <= b.sigma_upper) {
            return Err(invalid(format!(
                "diffusion bounds need 0 < sigma_lower <= sigma_upper, got {} and {}",
                b.sigma_lower, b.sigma_upper
            )));
        }
        if !(b.xi_upper >= 0.0 && b.b_max >= 0.0) {
            return Err(invalid("b_max and xi_upper must be non-negative"));
        }
        // Relative slack for bounds stated as rounded decimals.
        let slack = |v: f64| 1e-12 * v.abs().max(1.0);
        for x in self.interval.grid(BOUND_CHECK_POINTS) {
            let (bx, sx, jx) = ((self.drift)(x), (self.diffusion)(x), (self.jump)(x));
            if !(bx.is_finite() && sx.is_finite() && jx.is_finite()) {
                return Err(invalid(format!("coefficient not finite at x = {x}")));
            }
            if bx.abs() > b.b_max + slack(b.b_max) {
                return Err(invalid(format!("|b({x})| = {} exceeds b_max = {}", bx.abs(), b.b_max)));
            }
            if sx < b.sigma_lower - slack(sx) || sx > b.sigma_upper + slack(sx) {
                return Err(invalid(format!(
                    "sigma({x}) = {sx} outside [{}, {}]",
                    b.sigma_lower, b.sigma_upper
                )));
            }
            if jx < 0.0 || jx > b.xi_upper + slack(jx) {
                return Err(invalid(format!("xi({x}) = {jx} outside [0, {}]", b.xi_upper)));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    #[inline]
    pub fn jump(&self, x: f64) -> f64 {
        (self.jump)(x)
    }

    pub fn drift_fn(&self) -> &Coefficient {
        &self.drift
    }

    pub fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }
}

/// A discretely observed path `X_0, X_Δ, ..., X_{nΔ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    observations: Vec<f64>,
    delta: f64,
    fine_substeps: usize,
    seed: Option<u64>,
}

impl Trajectory {
    pub fn new(observations: Vec<f64>, delta: f64, fine_substeps: usize, seed: Option<u64>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(invalid(format!(
                "a trajectory needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid(format!("sampling interval must be positive, got {delta}")));
        }
        if fine_substeps == 0 {
            return Err(invalid("fine_substeps must be at least 1"));
        }
        if let Some(i) = observations.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidData(format!("observation {i} is not finite")));
        }
        Ok(Self {
            observations,
            delta,
            fine_substeps,
            seed,
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// The `n` design points `X_0, ..., X_{(n-1)Δ}`.
    pub fn design(&self) -> &[f64] {
        &self.observations[..self.n()]
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.observations.len() - 1
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn fine_substeps(&self) -> usize {
        self.fine_substeps
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Time span `nΔ`.
    pub fn horizon(&self) -> f64 {
        self.n() as f64 * self.delta
    }

    /// Number of design points inside `interval`.
    pub fn count_in(&self, interval: Interval) -> usize {
        self.design().iter().filter(|&&x| interval.contains(x)).count()
    }
}

/// Discretization settings of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOptions {
    /// Number of increments `n`.
    pub n: usize,
    /// Sampling interval `Δ`.
    pub delta: f64,
    /// Euler steps per sampling interval.
    #[serde(default = "default_fine_substeps")]
    pub fine_substeps: usize,
    #[serde(default)]
    pub x0: f64,
    /// Initial time span simulated and discarded.
    #[serde(default)]
    pub burn_in: f64,
}

pub fn default_fine_substeps() -> usize {
    5
}

impl SimulationOptions {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            n,
            delta,
            fine_substeps: default_fine_substeps(),
            x0: 0.0,
            burn_in: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.fine_substeps == 0 {
            return Err(invalid("fine_substeps must be at least 1"));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0 must be finite"));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(invalid("burn_in must be non-negative"));
        }
        Ok(())
    }

    fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.delta).ceil() as usize
    }
}

// Independent generator streams derived from one seed, so that the Brownian
// draws do not depend on how many jumps occur.
const BROWNIAN_STREAM: u64 = 0;
const JUMP_TIME_STREAM: u64 = 1;
const JUMP_SIZE_STREAM: u64 = 2;
const RESIDUAL_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generator driving the Brownian increments of `simulate_path` for `seed`.
pub fn brownian_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, BROWNIAN_STREAM)
}

/// Simulates a trajectory with an Euler scheme on the fine grid of step
/// `Δ / fine_substeps`, merged with the exact jump times.
///
/// On each segment `[t, t']` between consecutive events the state moves by
/// `(t'-t) b(X_t) + sqrt(t'-t) σ(X_t) N`; if `t'` is a jump time,
/// `ξ(X_t) ζ` is added as well. A jump at a grid time is applied before the
/// observation is recorded.
pub fn simulate_path(
    coeffs: &CoefficientSet,
    measure: &JumpMeasure,
    options: &SimulationOptions,
    seed: u64,
) -> Result<Trajectory> {
    options.validate()?;
    measure.validate()?;

    let substeps = options.fine_substeps;
    let burn = options.burn_in_steps();
    let total_fine = (burn + options.n) * substeps;
    let dt = options.delta / substeps as f64;
    let horizon = total_fine as f64 * dt;

    let (rate, sampler) = match measure {
        JumpMeasure::NoJumps => (0.0, None),
        JumpMeasure::CompoundPoisson { intensity, law } => (*intensity, Some(JumpSampler::new(law)?)),
        JumpMeasure::DyadicSeries { truncation, .. } => {
            let JumpMeasure::CompoundPoisson { intensity, law } = crate::levy::dyadic_to_compound(*truncation)
            else {
                unreachable!("dyadic_to_compound returns a compound Poisson measure");
            };
            (intensity, Some(JumpSampler::new(&law)?))
        }
    };
    let residual_sd = (measure.residual_variance_rate() * dt).sqrt();

    let mut brownian = stream(seed, BROWNIAN_STREAM);
    let mut time_rng = stream(seed, JUMP_TIME_STREAM);
    let mut size_rng = stream(seed, JUMP_SIZE_STREAM);
    let mut residual_rng = stream(seed, RESIDUAL_STREAM);
    let mut clock = PoissonClock::new(rate, horizon, &mut time_rng)?;
    let mut next_jump = clock.next();

    let step = |x: f64, h: f64, rng: &mut ChaCha8Rng| -> f64 {
        let noise: f64 = rng.sample(StandardNormal);
        x + h * coeffs.drift(x) + h.sqrt() * coeffs.diffusion(x) * noise
    };

    let mut observations = Vec::with_capacity(options.n + 1);
    let mut x = options.x0;
    let mut t = 0.0;
    if burn == 0 {
        observations.push(x);
    }
    for j in 1..=total_fine {
        let target = j as f64 * dt;
        while let Some(tau) = next_jump.filter(|&tau| tau <= target) {
            let h = tau - t;
            let x_start = x;
            if h > 0.0 {
                x = step(x, h, &mut brownian);
            }
            let size = sampler
                .as_ref()
                .expect("jump times imply a jump law")
                .sample(&mut size_rng);
            x += coeffs.jump(x_start) * size;
            t = tau;
            next_jump = clock.next();
            if !x.is_finite() {
                return Err(Error::SimulationDiverged { step: j, state: x });
            }
        }
        let h = target - t;
        if h > 0.0 {
            x = step(x, h, &mut brownian);
        }
        if residual_sd > 0.0 {
            let noise: f64 = residual_rng.sample(StandardNormal);
            x += coeffs.jump(x) * residual_sd * noise;
        }
        t = target;
        if !x.is_finite() {
            return Err(Error::SimulationDiverged { step: j, state: x });
        }
        if j % substeps == 0 && j / substeps >= burn {
            observations.push(x);
        }
    }
    Trajectory::new(observations, options.delta, substeps, Some(seed))
}

/// Which response variant a set holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// `Y_k = (X_{k+1} - X_k) / Δ`.
    Plain,
    /// `Y_k` zeroed on large increments and outside `A`.
    Truncated,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Plain => "plain",
            EstimatorKind::Truncated => "truncated",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The regression responses attached to a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    values: Vec<f64>,
    kind: EstimatorKind,
    threshold: Option<f64>,
    /// Entries with `X_k` in `A` zeroed because the increment exceeded the threshold.
    truncated: usize,
    /// All zeroed entries, including those with `X_k` outside `A`.
    zeroed: usize,
}

impl ResponseSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn truncated_count(&self) -> usize {
        self.truncated
    }

    pub fn zeroed_count(&self) -> usize {
        self.zeroed
    }
}

/// Scaled increments `Y_k = (X_{(k+1)Δ} - X_{kΔ}) / Δ`, `k = 0..n`.
pub fn responses(traj: &Trajectory) -> ResponseSet {
    let delta = traj.delta();
    let values = traj
        .observations()
        .windows(2)
        .map(|w| (w[1] - w[0]) / delta)
        .collect();
    ResponseSet {
        values,
        kind: EstimatorKind::Plain,
        threshold: None,
        truncated: 0,
        zeroed: 0,
    }
}

/// `C_Δ = (b_max + 3)Δ + (σ₀ + 4ξ₀) sqrt(Δ) ln(n)`.
pub fn truncation_threshold_raw(b_max: f64, sigma_upper: f64, xi_upper: f64, delta: f64, n: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    if n.is_nan() || n <= 1.0 {
        return Err(invalid(format!("threshold needs n > 1, got {n}")));
    }
    Ok((b_max + 3.0) * delta + (sigma_upper + 4.0 * xi_upper) * delta.sqrt() * n.ln())
}

/// Truncation threshold for the coefficient bounds of `coeffs`.
pub fn truncation_threshold(coeffs: &CoefficientSet, delta: f64, n: usize) -> Result<f64> {
    let b = coeffs.bounds();
    truncation_threshold_raw(b.b_max, b.sigma_upper, b.xi_upper, delta, n as f64)
}

/// Responses kept only where `|X_{k+1} - X_k| <= threshold` and `X_k ∈ A`,
/// zero elsewhere.
pub fn truncated_responses(traj: &Trajectory, threshold: f64, interval: Interval) -> Result<ResponseSet> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(invalid(format!("truncation threshold must be positive, got {threshold}")));
    }
    let delta = traj.delta();
    let mut truncated = 0;
    let mut zeroed = 0;
    let values = traj
        .observations()
        .windows(2)
        .map(|w| {
            let increment = w[1] - w[0];
            let inside = interval.contains(w[0]);
            let small = increment.abs() <= threshold;
            if inside && small {
                increment / delta
            } else {
                if inside {
                    truncated += 1;
                }
                zeroed += 1;
                0.0
            }
        })
        .collect();
    Ok(ResponseSet {
        values,
        kind: EstimatorKind::Truncated,
        threshold: Some(threshold),
        truncated,
        zeroed,
    })
}

/// Builds a response set from externally supplied values; used by tests and
/// by callers constructing synthetic regressions.
pub fn responses_from_values(values: Vec<f64>, kind: EstimatorKind) -> ResponseSet {
    ResponseSet {
        values,
        kind,
        threshold: None,
        truncated: 0,
        zeroed: 0,
    }
}

/// Convenience for a compound Poisson measure of intensity one.
pub fn unit_compound_poisson(law: JumpLaw) -> JumpMeasure {
    JumpMeasure::CompoundPoisson { intensity: 1.0, law }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(c: f64) -> Coefficient {
        Arc::new(move |_| c)
    }

    fn ou(sigma: f64, xi: f64) -> CoefficientSet {
        CoefficientSet::unchecked(
            Arc::new(|x| -2.0 * x),
            constant(sigma),
            constant(xi),
            CoefficientBounds {
                b_max: 2.0,
                sigma_upper: sigma,
                sigma_lower: sigma,
                xi_upper: xi,
            },
            Interval::unit(),
        )
    }

    fn long_run_variance(traj: &Trajectory, skip_time: f64) -> f64 {
        let skip = (skip_time / traj.delta()).ceil() as usize;
        let xs = &traj.observations()[skip..];
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    }

    #[test]
    fn frozen_dynamics_stay_put() {
        let coeffs = CoefficientSet::unchecked(
            constant(0.0),
            constant(0.0),
            constant(0.0),
            CoefficientBounds {
                b_max: 0.0,
                sigma_upper: 0.0,
                sigma_lower: 0.0,
                xi_upper: 0.0,
            },
            Interval::unit(),
        );
        let mut opts = SimulationOptions::new(200, 0.1);
        opts.x0 = 0.7;
        let measure = unit_compound_poisson(JumpLaw::TwoPoint);
        let traj = simulate_path(&coeffs, &measure, &opts, 3).unwrap();
        assert_eq!(traj.observations().len(), 201);
        assert!(traj.observations().iter().all(|&x| x == 0.7));
        assert!(responses(&traj).values().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn pure_diffusion_stationary_variance() {
        let opts = SimulationOptions::new(100_000, 0.1);
        let traj = simulate_path(&ou(1.0, 0.0), &JumpMeasure::NoJumps, &opts, 17).unwrap();
        let var = long_run_variance(&traj, 5.0);
        assert!((var - 0.25).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn jump_diffusion_stationary_variance() {
        let opts = SimulationOptions::new(100_000, 0.1);
        let measure = unit_compound_poisson(JumpLaw::TwoPoint);
        let traj = simulate_path(&ou(1.0, 1.0), &measure, &opts, 18).unwrap();
        let var = long_run_variance(&traj, 5.0);
        assert!((var - 0.5).abs() < 0.04, "variance {var}");
    }

    #[test]
    fn no_jump_path_matches_hand_rolled_euler() {
        let opts = SimulationOptions::new(500, 0.1);
        let coeffs = ou(1.0, 1.0);
        let traj = simulate_path(&coeffs, &JumpMeasure::NoJumps, &opts, 42).unwrap();
        let mut rng = brownian_rng(42);
        let dt = 0.1 / 5.0;
        let mut x = 0.0f64;
        let mut expected = vec![x];
        for j in 1..=500 * 5 {
            let noise: f64 = rng.sample(StandardNormal);
            let h = j as f64 * dt - (j - 1) as f64 * dt;
            x = x + h * (-2.0 * x) + h.sqrt() * noise;
            if j % 5 == 0 {
                expected.push(x);
            }
        }
        assert_eq!(traj.observations(), &expected[..]);
    }

    #[test]
    fn simulation_is_deterministic() {
        let opts = SimulationOptions::new(1000, 0.1);
        let measure = unit_compound_poisson(JumpLaw::TwoPoint);
        let a = simulate_path(&ou(1.0, 1.0), &measure, &opts, 5).unwrap();
        let b = simulate_path(&ou(1.0, 1.0), &measure, &opts, 5).unwrap();
        let c = simulate_path(&ou(1.0, 1.0), &measure, &opts, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn burn_in_discards_initial_span() {
        let mut opts = SimulationOptions::new(100, 0.1);
        let full = simulate_path(&ou(1.0, 0.0), &JumpMeasure::NoJumps, &opts, 8).unwrap();
        opts.n = 50;
        opts.burn_in = 5.0;
        let burned = simulate_path(&ou(1.0, 0.0), &JumpMeasure::NoJumps, &opts, 8).unwrap();
        assert_eq!(burned.observations().len(), 51);
        assert_eq!(burned.observations(), &full.observations()[50..]);
    }

    #[test]
    fn divergence_is_reported() {
        let coeffs = CoefficientSet::unchecked(
            Arc::new(|x| x * x * x),
            constant(1.0),
            constant(1.0),
            CoefficientBounds {
                b_max: 1.0,
                sigma_upper: 1.0,
                sigma_lower: 1.0,
                xi_upper: 1.0,
            },
            Interval::unit(),
        );
        let mut opts = SimulationOptions::new(1000, 0.1);
        opts.x0 = 10.0;
        let err = simulate_path(&coeffs, &JumpMeasure::NoJumps, &opts, 1).unwrap_err();
        assert!(matches!(err, Error::SimulationDiverged { .. }), "{err}");
    }

    #[test]
    fn response_arithmetic() {
        let traj = Trajectory::new(vec![0.0, 0.3, 0.1], 0.1, 5, None).unwrap();
        let ys = responses(&traj);
        assert_eq!(ys.len(), 2);
        assert!((ys.values()[0] - 3.0).abs() < 1e-12);
        assert!((ys.values()[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn responses_telescope() {
        let opts = SimulationOptions::new(2000, 0.1);
        let traj = simulate_path(&ou(1.0, 1.0), &unit_compound_poisson(JumpLaw::TwoPoint), &opts, 2).unwrap();
        let sum: f64 = responses(&traj).values().iter().map(|y| y * traj.delta()).sum();
        let obs = traj.observations();
        assert!((sum - (obs[obs.len() - 1] - obs[0])).abs() < 1e-9);
    }

    #[test]
    fn threshold_formula() {
        let c = truncation_threshold_raw(2.0, 1.0, 1.0, 0.1, 1e4).unwrap();
        let expected = 0.5 + 5.0 * 0.1f64.sqrt() * 1e4f64.ln();
        assert!((c - expected).abs() < 1e-12);
        assert!((c - 15.0637).abs() < 1e-3);
        let degenerate = truncation_threshold_raw(0.0, 0.0, 0.0, 1.0, std::f64::consts::E).unwrap();
        assert!((degenerate - 3.0).abs() < 1e-12);
        let small = truncation_threshold_raw(2.0, 1.0, 1.0, 0.1, 1e3).unwrap();
        assert!(small < c);
        assert!(truncation_threshold_raw(2.0, 1.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn truncation_indicators() {
        let traj = Trajectory::new(vec![0.0, 0.2, 2.0, 2.1, -0.5, 30.0], 0.1, 5, None).unwrap();
        let c = truncation_threshold_raw(2.0, 1.0, 1.0, 0.1, 1e4).unwrap();
        let plain = responses(&traj);
        let trunc = truncated_responses(&traj, c, Interval::unit()).unwrap();
        // X = 0 in A, increment 0.2 kept.
        assert_eq!(trunc.values()[0], plain.values()[0]);
        // X = 2 and 2.1 outside A.
        assert_eq!(trunc.values()[2], 0.0);
        assert_eq!(trunc.values()[3], 0.0);
        // X = -0.5 in A but increment 30.5 > C.
        assert_eq!(trunc.values()[4], 0.0);
        assert_eq!(trunc.truncated_count(), 1);
        assert_eq!(trunc.zeroed_count(), 3);
        // Increment 1.8 from X = 0.2 is within the threshold.
        assert_eq!(trunc.values()[1], plain.values()[1]);
    }

    #[test]
    fn inactive_truncation_reproduces_plain_responses() {
        let opts = SimulationOptions::new(1000, 0.1);
        let traj = simulate_path(&ou(0.3, 0.0), &JumpMeasure::NoJumps, &opts, 4).unwrap();
        let wide = Interval::new(-1e6, 1e6).unwrap();
        let trunc = truncated_responses(&traj, 1e300, wide).unwrap();
        assert_eq!(trunc.values(), responses(&traj).values());
        assert_eq!(trunc.zeroed_count(), 0);
    }

    #[test]
    fn coefficient_validation() {
        let interval = Interval::unit();
        let ok = CoefficientSet::with_grid_bounds(Arc::new(|x| -2.0 * x), constant(1.0), constant(1.0), interval)
            .unwrap();
        assert_eq!(ok.bounds().b_max, 2.0);
        let bad = CoefficientSet::new(
            Arc::new(|x| -2.0 * x),
            constant(1.0),
            constant(1.0),
            CoefficientBounds {
                b_max: 1.5,
                sigma_upper: 1.0,
                sigma_lower: 1.0,
                xi_upper: 1.0,
            },
            interval,
        );
        assert!(bad.is_err());
        let no_floor = CoefficientSet::with_grid_bounds(Arc::new(|x| x), Arc::new(|x| x), constant(1.0), interval);
        assert!(no_floor.is_err());
    }
}
