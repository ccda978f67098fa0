//! Least-squares drift estimators on a spline space.
//!
//! The estimate minimizes the contrast `(1/n) sum_k (Y_k - t(X_k))^2` over
//! `t` in the space, through the normal equations `G a = v` with
//! `G_ij = (1/n) sum_k B_i(X_k) B_j(X_k)` and `v_i = (1/n) sum_k Y_k B_i(X_k)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::sde::{EstimatorKind, ResponseSet, Trajectory};
use crate::spline::{LocalBasis, SplineSpace};

/// Smallest Gram eigenvalue for which an estimate counts as usable.
pub const DEFAULT_CONDITIONING_FLOOR: f64 = 1e-8;

/// A fitted drift estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub space: SplineSpace,
    pub coefficients: Vec<f64>,
    pub kind: EstimatorKind,
    /// Contrast value at the fit.
    pub contrast: f64,
    /// Smallest eigenvalue of the normalized Gram matrix.
    pub gram_min_eig: f64,
    pub usable: bool,
}

impl DriftEstimate {
    pub fn eval(&self, x: f64) -> f64 {
        self.space.eval_unchecked(&self.coefficients, x)
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }
}

/// Design of one spline space on one trajectory: basis values at the design
/// points, the Gram matrix and its factorizations. Shared by the plain and
/// truncated fits.
pub struct NormalEquations<'a> {
    space: &'a SplineSpace,
    n: usize,
    locals: Vec<Option<LocalBasis>>,
    gram: DMatrix<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    min_eig: f64,
    usable: bool,
}

impl<'a> NormalEquations<'a> {
    pub fn new(space: &'a SplineSpace, traj: &Trajectory, floor: f64) -> Self {
        let n = traj.n();
        let d = space.dimension();
        let locals: Vec<Option<LocalBasis>> = traj.design().iter().map(|&x| space.local_basis(x)).collect();
        let mut gram = DMatrix::<f64>::zeros(d, d);
        for local in locals.iter().flatten() {
            for (i, bi) in local.iter() {
                for (j, bj) in local.iter().filter(|&(j, _)| j >= i) {
                    gram[(i, j)] += bi * bj;
                }
            }
        }
        let scale = 1.0 / n as f64;
        for i in 0..d {
            for j in i..d {
                let v = gram[(i, j)] * scale;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let eigen = SymmetricEigen::new(gram.clone());
        let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        Self {
            space,
            n,
            locals,
            gram,
            eigen,
            min_eig,
            usable: min_eig >= floor,
        }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    pub fn usable(&self) -> bool {
        self.usable
    }

    /// Right-hand side `v`.
    pub fn moment_vector(&self, responses: &ResponseSet) -> Result<DVector<f64>> {
        check_responses(self.n, responses)?;
        let mut v = DVector::<f64>::zeros(self.space.dimension());
        for (local, &y) in self.locals.iter().zip(responses.values()) {
            if let Some(local) = local {
                for (i, b) in local.iter() {
                    v[i] += y * b;
                }
            }
        }
        Ok(v / self.n as f64)
    }

    /// Minimum-norm minimizer of the contrast.
    pub fn solve(&self, responses: &ResponseSet) -> Result<DriftEstimate> {
        let v = self.moment_vector(responses)?;
        let coefficients = self.min_norm_solution(&v);
        let contrast = self.contrast(&coefficients, responses);
        Ok(DriftEstimate {
            space: self.space.clone(),
            coefficients: coefficients.iter().copied().collect(),
            kind: responses.kind(),
            contrast,
            gram_min_eig: self.min_eig,
            usable: self.usable,
        })
    }

    fn min_norm_solution(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.usable {
            if let Some(chol) = self.gram.clone().cholesky() {
                return chol.solve(v);
            }
        }
        // Pseudo-inverse on the numerically nonzero part of the spectrum.
        let values = &self.eigen.eigenvalues;
        let vectors = &self.eigen.eigenvectors;
        let top = values.iter().copied().fold(0.0, f64::max);
        let cutoff = top * self.space.dimension() as f64 * f64::EPSILON;
        let mut x = DVector::<f64>::zeros(v.len());
        if top <= 0.0 {
            return x;
        }
        for (k, &lambda) in values.iter().enumerate() {
            if lambda > cutoff {
                let u = vectors.column(k);
                x += u * (u.dot(v) / lambda);
            }
        }
        x
    }

    fn contrast(&self, coefficients: &DVector<f64>, responses: &ResponseSet) -> f64 {
        let sum: f64 = self
            .locals
            .iter()
            .zip(responses.values())
            .map(|(local, &y)| {
                let fitted = local
                    .map(|l| l.iter().map(|(i, b)| coefficients[i] * b).sum::<f64>())
                    .unwrap_or(0.0);
                (y - fitted).powi(2)
            })
            .sum();
        sum / self.n as f64
    }
}

fn check_responses(n: usize, responses: &ResponseSet) -> Result<()> {
    if n == 0 {
        return Err(invalid("cannot fit on zero observations"));
    }
    if responses.len() != n {
        return Err(invalid(format!(
            "expected {n} responses for the trajectory, got {}",
            responses.len()
        )));
    }
    if let Some(k) = responses.values().iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidData(format!("response {k} is not finite")));
    }
    Ok(())
}

/// Least-squares fit of `responses` on `space` with the default conditioning floor.
pub fn fit(space: &SplineSpace, traj: &Trajectory, responses: &ResponseSet) -> Result<DriftEstimate> {
    fit_with_floor(space, traj, responses, DEFAULT_CONDITIONING_FLOOR)
}

pub fn fit_with_floor(
    space: &SplineSpace,
    traj: &Trajectory,
    responses: &ResponseSet,
    floor: f64,
) -> Result<DriftEstimate> {
    check_responses(traj.n(), responses)?;
    NormalEquations::new(space, traj, floor).solve(responses)
}

/// `(1/n) sum_k (Y_k - t(X_k))^2` for the estimate `t`.
pub fn contrast_of(estimate: &DriftEstimate, traj: &Trajectory, responses: &ResponseSet) -> Result<f64> {
    check_responses(traj.n(), responses)?;
    let sum: f64 = traj
        .design()
        .iter()
        .zip(responses.values())
        .map(|(&x, &y)| (y - estimate.eval(x)).powi(2))
        .sum();
    Ok(sum / traj.n() as f64)
}

/// Smallest Gram eigenvalue and whether it clears `floor`.
pub fn gram_condition(space: &SplineSpace, traj: &Trajectory, floor: f64) -> (f64, bool) {
    let normal = NormalEquations::new(space, traj, floor);
    (normal.min_eigenvalue(), normal.usable())
}
