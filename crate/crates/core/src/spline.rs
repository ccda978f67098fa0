//! Clamped B-spline spaces on dyadic partitions of the estimation interval.
//!
//! `S_{m,r}` holds the degree-`r` splines on `2^m` equal cells of `A`, with
//! `r`-fold extra boundary knots, so `dim S_{m,r} = 2^m + r` and the basis is
//! a partition of unity on all of `A`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interval::Interval;

pub const MAX_DEGREE: usize = 3;
pub const MAX_LEVEL: u32 = 20;

/// Values of the at most `r + 1` basis functions that are nonzero at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    /// Index of the first nonzero basis function.
    pub first: usize,
    pub values: [f64; MAX_DEGREE + 1],
    pub len: usize,
}

impl LocalBasis {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values[..self.len]
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.first + k, v))
    }
}

/// The spline space `S_{m,r}` on `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace {
    level: u32,
    degree: usize,
    interval: Interval,
    knots: Vec<f64>,
}

/// Identifier `(m, r)` of a spline space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelIndex {
    pub level: u32,
    pub degree: usize,
}

impl ModelIndex {
    pub fn new(level: u32, degree: usize) -> Self {
        Self { level, degree }
    }

    /// `2^m + r`.
    pub fn dimension(&self) -> usize {
        (1usize << self.level) + self.degree
    }
}

impl SplineSpace {
    pub fn new(level: u32, degree: usize, interval: Interval) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(invalid(format!("spline degree must be in 1..=3, got {degree}")));
        }
        if level > MAX_LEVEL {
            return Err(invalid(format!("dyadic level {level} exceeds {MAX_LEVEL}")));
        }
        let cells = 1usize << level;
        let (a, b) = (interval.lo(), interval.hi());
        let mut knots = Vec::with_capacity(cells + 2 * degree + 1);
        knots.extend(std::iter::repeat_n(a, degree + 1));
        knots.extend((1..cells).map(|i| a + interval.width() * i as f64 / cells as f64));
        knots.extend(std::iter::repeat_n(b, degree + 1));
        Ok(Self {
            level,
            degree,
            interval,
            knots,
        })
    }

    pub fn from_index(index: ModelIndex, interval: Interval) -> Result<Self> {
        Self::new(index.level, index.degree, interval)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn index(&self) -> ModelIndex {
        ModelIndex::new(self.level, self.degree)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn cells(&self) -> usize {
        1 << self.level
    }

    /// `2^m + r`.
    pub fn dimension(&self) -> usize {
        self.cells() + self.degree
    }

    /// The space one dyadic level finer.
    pub fn refine(&self) -> Result<Self> {
        Self::new(self.level + 1, self.degree, self.interval)
    }

    /// Knot averages `(t_{i+1} + ... + t_{i+r}) / r`; the coefficients of the
    /// identity function.
    pub fn greville(&self) -> Vec<f64> {
        let r = self.degree;
        (0..self.dimension())
            .map(|i| self.knots[i + 1..=i + r].iter().sum::<f64>() / r as f64)
            .collect()
    }

    /// Nonzero basis values at `x`, or `None` outside `A`.
    pub fn local_basis(&self, x: f64) -> Option<LocalBasis> {
        if !self.interval.contains(x) {
            return None;
        }
        let r = self.degree;
        let cells = self.cells();
        let pos = (x - self.interval.lo()) / self.interval.width() * cells as f64;
        let mut cell = (pos.floor().max(0.0) as usize).min(cells - 1);
        // Keep the span consistent with the stored knots at cell boundaries.
        let t = &self.knots;
        while cell > 0 && x < t[cell + r] {
            cell -= 1;
        }
        while cell + 1 < cells && x >= t[cell + r + 1] {
            cell += 1;
        }
        let span = cell + r;

        let mut values = [0.0; MAX_DEGREE + 1];
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        values[0] = 1.0;
        for j in 1..=r {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for k in 0..j {
                let temp = values[k] / (right[k + 1] + left[j - k]);
                values[k] = saved + right[k + 1] * temp;
                saved = left[j - k] * temp;
            }
            values[j] = saved;
        }
        Some(LocalBasis {
            first: cell,
            values,
            len: r + 1,
        })
    }

    /// All `D` basis values at `x`; the zero vector outside `A`.
    pub fn basis_eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        if let Some(local) = self.local_basis(x) {
            for (i, v) in local.iter() {
                out[i] = v;
            }
        }
        out
    }

    /// `sum_i c_i B_i(x)`, zero outside `A`.
    pub fn eval_estimate(&self, coefficients: &[f64], x: f64) -> Result<f64> {
        if coefficients.len() != self.dimension() {
            return Err(invalid(format!(
                "expected {} coefficients for S({}, {}), got {}",
                self.dimension(),
                self.level,
                self.degree,
                coefficients.len()
            )));
        }
        Ok(self.eval_unchecked(coefficients, x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, coefficients: &[f64], x: f64) -> f64 {
        match self.local_basis(x) {
            Some(local) => local.iter().map(|(i, v)| coefficients[i] * v).sum(),
            None => 0.0,
        }
    }

    /// Knot-insertion matrix `R` with `basis_coarse(x) = Rᵀ basis_fine(x)`.
    ///
    /// `fine` must have the same degree and interval and be at the same level
    /// (identity) or one level finer.
    pub fn refinement_matrix(&self, fine: &SplineSpace) -> Result<DMatrix<f64>> {
        if self.degree != fine.degree || self.interval != fine.interval {
            return Err(invalid("refinement needs equal degrees and intervals"));
        }
        if fine.level == self.level {
            return Ok(DMatrix::identity(self.dimension(), self.dimension()));
        }
        if fine.level != self.level + 1 {
            return Err(invalid(format!(
                "refinement goes one level at a time, got {} -> {}",
                self.level, fine.level
            )));
        }
        let r = self.degree;
        // Columns of `coeffs` are the fine-space coefficients of each coarse basis function.
        let mut knots = self.knots.clone();
        let mut coeffs = DMatrix::<f64>::identity(self.dimension(), self.dimension());
        let h = self.interval.width() / self.cells() as f64;
        for cell in 0..self.cells() {
            let u = self.interval.lo() + h * (cell as f64 + 0.5);
            let span = knots.partition_point(|&t| t <= u) - 1;
            let rows = coeffs.nrows();
            let mut next = DMatrix::<f64>::zeros(rows + 1, coeffs.ncols());
            for i in 0..=rows {
                let alpha = if i + r <= span {
                    1.0
                } else if i > span {
                    0.0
                } else {
                    (u - knots[i]) / (knots[i + r] - knots[i])
                };
                for col in 0..coeffs.ncols() {
                    let keep = if i < rows { coeffs[(i, col)] } else { 0.0 };
                    let prev = if i > 0 { coeffs[(i - 1, col)] } else { 0.0 };
                    next[(i, col)] = alpha * keep + (1.0 - alpha) * prev;
                }
            }
            knots.insert(span + 1, u);
            coeffs = next;
        }
        debug_assert_eq!(coeffs.nrows(), fine.dimension());
        Ok(coeffs)
    }
}

/// Refinement matrix between two spaces; see [`SplineSpace::refinement_matrix`].
pub fn nesting_check(coarse: &SplineSpace, fine: &SplineSpace) -> Result<DMatrix<f64>> {
    coarse.refinement_matrix(fine)
}
