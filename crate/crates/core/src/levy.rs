//! Jump measures and the samplers for jump times and jump sizes.
//!
//! A compound Poisson measure is `intensity * law`, with `law` a probability
//! distribution of the jump size. The dyadic series measure
//! `sum_k 2^(k+2) (delta_{2^-k} + delta_{-2^-k})` has infinite activity and is
//! simulated through its truncation at level `K`, optionally completed by a
//! Gaussian term carrying the residual small-jump variance.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on the total mass of an atom table.
pub const TABLE_MASS_TOL: f64 = 1e-12;

/// Default decay of the symmetric exponential law, chosen so that the measure
/// `exp(-decay |z|) dz / 2` has unit second moment (`2 / decay^3 = 1`).
pub fn default_exponential_decay() -> f64 {
    2f64.powf(1.0 / 3.0)
}

/// Scale of the stretched-exponential law that gives it unit second moment.
pub fn default_stretched_scale() -> f64 {
    24f64.sqrt()
}

/// Default truncation level of the dyadic series.
pub const DEFAULT_DYADIC_TRUNCATION: u32 = 10;

/// Probability law of a single jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    /// `(delta_1 + delta_{-1}) / 2`.
    TwoPoint,
    /// Laplace law with density `decay * exp(-decay |z|) / 2`.
    SymmetricExponential {
        #[serde(default = "default_exponential_decay")]
        decay: f64,
    },
    /// Density `(1/4) sqrt(scale / |z|) exp(-sqrt(scale |z|))`; heavier than
    /// any exponential tail.
    StretchedExponential {
        #[serde(default = "default_stretched_scale")]
        scale: f64,
    },
    /// Finite table of `(atom, probability)` pairs.
    Table { atoms: Vec<(f64, f64)> },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::TwoPoint => Ok(()),
            JumpLaw::SymmetricExponential { decay } => {
                if decay.is_finite() && *decay > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("exponential decay must be positive, got {decay}")))
                }
            }
            JumpLaw::StretchedExponential { scale } => {
                if scale.is_finite() && *scale > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("stretched-exponential scale must be positive, got {scale}")))
                }
            }
            JumpLaw::Table { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("atom table is empty"));
                }
                let mut mass = 0.0;
                for &(z, p) in atoms {
                    if !z.is_finite() || !p.is_finite() || p < 0.0 {
                        return Err(invalid(format!("bad atom ({z}, {p})")));
                    }
                    mass += p;
                }
                if (mass - 1.0).abs() > TABLE_MASS_TOL {
                    return Err(invalid(format!("atom probabilities sum to {mass}, expected 1")));
                }
                if self.second_moment() <= 0.0 {
                    return Err(invalid("atom table has zero second moment"));
                }
                Ok(())
            }
        }
    }

    /// `E[z^2]` under the law.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpLaw::TwoPoint => 1.0,
            JumpLaw::SymmetricExponential { decay } => 2.0 / (decay * decay),
            // z = u^2 / scale with u ~ Exp(1), and E[u^4] = 24.
            JumpLaw::StretchedExponential { scale } => 24.0 / (scale * scale),
            JumpLaw::Table { atoms } => atoms.iter().map(|&(z, p)| p * z * z).sum(),
        }
    }
}

/// Lévy measure driving the jump part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpMeasure {
    /// Pure diffusion.
    NoJumps,
    CompoundPoisson { intensity: f64, law: JumpLaw },
    /// Dyadic series truncated at level `truncation`. With `residual_gaussian`
    /// the jumps below `2^-truncation` are replaced by a Gaussian term with the
    /// same variance on every fine step.
    DyadicSeries {
        #[serde(default = "default_truncation")]
        truncation: u32,
        #[serde(default)]
        residual_gaussian: bool,
    },
}

fn default_truncation() -> u32 {
    DEFAULT_DYADIC_TRUNCATION
}

impl JumpMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::NoJumps => Ok(()),
            JumpMeasure::CompoundPoisson { intensity, law } => {
                if !(intensity.is_finite() && *intensity > 0.0) {
                    return Err(invalid(format!(
                        "compound Poisson intensity must be positive, got {intensity}"
                    )));
                }
                law.validate()
            }
            JumpMeasure::DyadicSeries { truncation, .. } => {
                if *truncation > 40 {
                    return Err(invalid(format!("dyadic truncation {truncation} is too fine to simulate")));
                }
                Ok(())
            }
        }
    }

    /// `∫ z^2 ν(dz)` of the simulated (finite) representation.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpMeasure::NoJumps => 0.0,
            JumpMeasure::CompoundPoisson { intensity, law } => intensity * law.second_moment(),
            JumpMeasure::DyadicSeries { truncation, .. } => dyadic_second_moment(*truncation),
        }
    }

    /// Blumenthal–Getoor index of the measure the variant represents.
    ///
    /// For the dyadic series `∫_{|z|<=1} |z|^a ν(dz) = 8 sum_k 2^{k(1-a)}`,
    /// finite exactly when `a > 1`.
    pub fn blumenthal_getoor_index(&self) -> f64 {
        match self {
            JumpMeasure::NoJumps | JumpMeasure::CompoundPoisson { .. } => 0.0,
            JumpMeasure::DyadicSeries { .. } => 1.0,
        }
    }

    /// Jumps per unit time of the simulated representation.
    pub fn total_intensity(&self) -> f64 {
        match self {
            JumpMeasure::NoJumps => 0.0,
            JumpMeasure::CompoundPoisson { intensity, .. } => *intensity,
            JumpMeasure::DyadicSeries { truncation, .. } => dyadic_total_intensity(*truncation),
        }
    }

    /// Variance per unit time that the truncated representation leaves out and
    /// that is added back as a Gaussian term, if enabled.
    pub fn residual_variance_rate(&self) -> f64 {
        match self {
            JumpMeasure::DyadicSeries {
                truncation,
                residual_gaussian: true,
            } => 16.0 - dyadic_second_moment(*truncation),
            _ => 0.0,
        }
    }
}

/// `sum_{k<=K} 2^(k+3)`.
pub fn dyadic_total_intensity(truncation: u32) -> f64 {
    8.0 * (2f64.powi(truncation as i32 + 1) - 1.0)
}

/// `sum_{k<=K} 2^(3-k) = 16 - 2^(3-K)`.
pub fn dyadic_second_moment(truncation: u32) -> f64 {
    16.0 - 2f64.powi(3 - truncation as i32)
}

/// Finite compound Poisson representation of the dyadic series up to level
/// `truncation`: atoms `±2^-k`, each with rate `2^(k+2)`.
pub fn dyadic_to_compound(truncation: u32) -> JumpMeasure {
    let intensity = dyadic_total_intensity(truncation);
    let mut atoms = Vec::with_capacity(2 * (truncation as usize + 1));
    for k in 0..=truncation as i32 {
        let rate = 2f64.powi(k + 2);
        let size = 2f64.powi(-k);
        atoms.push((size, rate / intensity));
        atoms.push((-size, rate / intensity));
    }
    JumpMeasure::CompoundPoisson {
        intensity,
        law: JumpLaw::Table { atoms },
    }
}

/// Arrival times of a Poisson process on `(0, horizon]`, generated lazily.
pub struct PoissonClock<'a, R: Rng + ?Sized> {
    rate: f64,
    horizon: f64,
    now: f64,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> PoissonClock<'a, R> {
    pub fn new(rate: f64, horizon: f64, rng: &'a mut R) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid(format!("jump intensity must be non-negative, got {rate}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            rate,
            horizon,
            now: 0.0,
            rng,
        })
    }
}

impl<R: Rng + ?Sized> Iterator for PoissonClock<'_, R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.rate == 0.0 || self.now > self.horizon {
            return None;
        }
        let gap: f64 = self.rng.sample::<f64, _>(Exp1) / self.rate;
        let next = self.now + gap;
        // A zero gap (underflow) would break strict ordering; nudge forward.
        self.now = if next > self.now { next } else { next_up(self.now) };
        if self.now <= self.horizon {
            Some(self.now)
        } else {
            None
        }
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Ordered jump times on `(0, horizon]` for a Poisson process of rate `intensity`.
pub fn sample_jump_times<R: Rng + ?Sized>(intensity: f64, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    Ok(PoissonClock::new(intensity, horizon, rng)?.collect())
}

/// Draws jump sizes from a validated law. The atom table is prepared once.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    TwoPoint,
    Exponential { decay: f64 },
    Stretched { scale: f64 },
    Table { atoms: Vec<f64>, cumulative: Vec<f64> },
}

impl JumpSampler {
    pub fn new(law: &JumpLaw) -> Result<Self> {
        law.validate()?;
        let kind = match law {
            JumpLaw::TwoPoint => SamplerKind::TwoPoint,
            JumpLaw::SymmetricExponential { decay } => SamplerKind::Exponential { decay: *decay },
            JumpLaw::StretchedExponential { scale } => SamplerKind::Stretched { scale: *scale },
            JumpLaw::Table { atoms } => {
                let mut acc = 0.0;
                let cumulative = atoms
                    .iter()
                    .map(|&(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                SamplerKind::Table {
                    atoms: atoms.iter().map(|&(z, _)| z).collect(),
                    cumulative,
                }
            }
        };
        Ok(Self { kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::TwoPoint => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SamplerKind::Exponential { decay } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = rng.sample(Exp1);
                sign * u / decay
            }
            SamplerKind::Stretched { scale } => {
                // u = sqrt(scale |z|) has one-sided density exp(-u)/2 per sign.
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = rng.sample(Exp1);
                sign * u * u / scale
            }
            SamplerKind::Table { atoms, cumulative } => {
                let total = *cumulative.last().expect("validated table is non-empty");
                let target = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= target);
                atoms[idx.min(atoms.len() - 1)]
            }
        }
    }
}

/// One jump size drawn from `law`.
pub fn sample_jump_size<R: Rng + ?Sized>(law: &JumpLaw, rng: &mut R) -> Result<f64> {
    Ok(JumpSampler::new(law)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn moments(law: &JumpLaw, draws: usize, seed: u64) -> (f64, f64) {
        let sampler = JumpSampler::new(law).unwrap();
        let mut r = rng(seed);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let z = sampler.sample(&mut r);
            s1 += z;
            s2 += z * z;
        }
        (s1 / draws as f64, s2 / draws as f64)
    }

    #[test]
    fn zero_rate_has_no_jumps() {
        assert!(sample_jump_times(0.0, 10.0, &mut rng(1)).unwrap().is_empty());
    }

    #[test]
    fn negative_parameters_are_rejected() {
        assert!(sample_jump_times(-1.0, 10.0, &mut rng(1)).is_err());
        assert!(sample_jump_times(1.0, 0.0, &mut rng(1)).is_err());
        assert!(sample_jump_times(1.0, -3.0, &mut rng(1)).is_err());
    }

    #[test]
    fn jump_times_are_strictly_increasing_inside_horizon() {
        let times = sample_jump_times(1.0, 1000.0, &mut rng(7)).unwrap();
        assert!(!times.is_empty());
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert!(times.iter().all(|&t| t > 0.0 && t <= 1000.0));
    }

    #[test]
    fn jump_count_mean_matches_poisson() {
        let seeds = 200;
        let total: usize = (0..seeds)
            .map(|s| sample_jump_times(1.0, 1000.0, &mut rng(s)).unwrap().len())
            .sum();
        let mean = total as f64 / seeds as f64;
        let tol = 3.0 * (1000.0f64 / seeds as f64).sqrt();
        assert!((mean - 1000.0).abs() < tol, "mean count {mean}");
    }

    #[test]
    fn jump_times_are_deterministic() {
        let a = sample_jump_times(2.5, 50.0, &mut rng(99)).unwrap();
        let b = sample_jump_times(2.5, 50.0, &mut rng(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_point_law() {
        let sampler = JumpSampler::new(&JumpLaw::TwoPoint).unwrap();
        let mut r = rng(3);
        let draws: Vec<f64> = (0..10_000).map(|_| sampler.sample(&mut r)).collect();
        assert!(draws.iter().all(|&z| z == 1.0 || z == -1.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.05);
    }

    #[test]
    fn stretched_exponential_has_unit_second_moment() {
        let law = JumpLaw::StretchedExponential {
            scale: default_stretched_scale(),
        };
        assert!((law.second_moment() - 1.0).abs() < 1e-12);
        let (_, m2) = moments(&law, 100_000, 11);
        assert!((m2 - 1.0).abs() < 0.05, "E z^2 = {m2}");
    }

    #[test]
    fn symmetric_exponential_second_moment() {
        let decay = default_exponential_decay();
        let law = JumpLaw::SymmetricExponential { decay };
        // Normalized Laplace law: E z^2 = 2 / decay^2.
        let expected = 2.0 / (decay * decay);
        let (_, m2) = moments(&law, 100_000, 12);
        assert!((m2 - expected).abs() < 0.05 * expected, "E z^2 = {m2}, expected {expected}");
    }

    #[test]
    fn symmetric_laws_have_vanishing_mean() {
        let n = 100_000;
        for (i, law) in [
            JumpLaw::TwoPoint,
            JumpLaw::SymmetricExponential {
                decay: default_exponential_decay(),
            },
            JumpLaw::StretchedExponential {
                scale: default_stretched_scale(),
            },
        ]
        .iter()
        .enumerate()
        {
            let (m1, m2) = moments(law, n, 100 + i as u64);
            let sd = (m2 - m1 * m1).sqrt();
            assert!(m1.abs() < 4.0 * sd / (n as f64).sqrt(), "{law:?}: mean {m1}");
        }
    }

    #[test]
    fn table_law_validation() {
        let bad = JumpLaw::Table {
            atoms: vec![(1.0, 0.5), (-1.0, 0.4)],
        };
        assert!(bad.validate().is_err());
        let zero = JumpLaw::Table { atoms: vec![(0.0, 1.0)] };
        assert!(zero.validate().is_err());
        let ok = JumpLaw::Table {
            atoms: vec![(2.0, 0.25), (-2.0, 0.75)],
        };
        ok.validate().unwrap();
        assert_eq!(ok.second_moment(), 4.0);
    }

    #[test]
    fn table_sampler_respects_probabilities() {
        let law = JumpLaw::Table {
            atoms: vec![(3.0, 0.2), (-1.0, 0.8)],
        };
        let sampler = JumpSampler::new(&law).unwrap();
        let mut r = rng(5);
        let n = 50_000;
        let hits = (0..n).filter(|_| sampler.sample(&mut r) == 3.0).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.2).abs() < 4.0 * (0.2f64 * 0.8 / n as f64).sqrt());
    }

    #[test]
    fn dyadic_level_zero() {
        let JumpMeasure::CompoundPoisson { intensity, law } = dyadic_to_compound(0) else {
            panic!("expected compound Poisson");
        };
        assert_eq!(intensity, 8.0);
        let JumpLaw::Table { atoms } = &law else { panic!() };
        let rates: Vec<(f64, f64)> = atoms.iter().map(|&(z, p)| (z, p * intensity)).collect();
        assert_eq!(rates, vec![(1.0, 4.0), (-1.0, 4.0)]);
        assert_eq!(intensity * law.second_moment(), 8.0);
    }

    #[test]
    fn dyadic_second_moments() {
        let m10 = dyadic_to_compound(10).second_moment();
        assert!((m10 - (16.0 - 2f64.powi(-7))).abs() < 1e-12);
        assert!((m10 - 15.9922).abs() < 1e-4);
        let far = dyadic_second_moment(40);
        assert!((16.0 - far) < 1e-10);
        let explicit = JumpMeasure::DyadicSeries {
            truncation: 3,
            residual_gaussian: false,
        };
        assert_eq!(explicit.second_moment(), 15.0);
        assert_eq!(explicit.total_intensity(), 8.0 + 16.0 + 32.0 + 64.0);
    }

    #[test]
    fn dyadic_second_moment_is_monotone_and_bounded() {
        let mut prev = 0.0;
        for k in 0..30 {
            let m = dyadic_second_moment(k);
            assert!(m > prev && m < 16.0);
            // Direct summation agrees with the closed form.
            let direct: f64 = (0..=k as i32).map(|j| 2f64.powi(3 - j)).sum();
            assert!((m - direct).abs() < 1e-12);
            prev = m;
        }
    }

    #[test]
    fn measure_metadata() {
        let model1 = JumpMeasure::CompoundPoisson {
            intensity: 1.0,
            law: JumpLaw::TwoPoint,
        };
        assert_eq!(model1.second_moment(), 1.0);
        assert_eq!(model1.blumenthal_getoor_index(), 0.0);
        let model3 = JumpMeasure::CompoundPoisson {
            intensity: 1.0,
            law: JumpLaw::StretchedExponential {
                scale: default_stretched_scale(),
            },
        };
        assert!((model3.second_moment() - 1.0).abs() < 1e-12);
        let dyadic = JumpMeasure::DyadicSeries {
            truncation: 10,
            residual_gaussian: true,
        };
        assert_eq!(dyadic.blumenthal_getoor_index(), 1.0);
        assert!((dyadic.residual_variance_rate() - 2f64.powi(-7)).abs() < 1e-15);
        assert!(JumpMeasure::CompoundPoisson {
            intensity: 0.0,
            law: JumpLaw::TwoPoint
        }
        .validate()
        .is_err());
    }
}
