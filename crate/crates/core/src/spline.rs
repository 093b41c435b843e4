//! Uniform B-spline bases on an extended knot grid.
//!
//! A [`KnotVector`] covers `[range_min, range_max]` with `grid_count` equal
//! intervals and is padded with `degree` knots of the same spacing on each
//! side, giving `grid_count + degree` basis functions that form a partition
//! of unity over the nominal range. Inputs outside the range are clamped to
//! the nearer endpoint, so every evaluation is total.
//!
//! Evaluation uses the triangular form of the Cox-de Boor recursion and only
//! touches the `degree + 1` functions that are nonzero at `x`. The dense
//! [`KnotVector::basis_values`] / [`KnotVector::basis_derivatives`] are built
//! on top of the sparse [`LocalBasis`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest degree the stack buffers in [`LocalBasis`] can hold.
pub const MAX_DEGREE: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
    grid_count: usize,
    range_min: f64,
    range_max: f64,
}

impl KnotVector {
    /// Uniform grid of `grid_count` intervals over `[range_min, range_max]`,
    /// extended by `degree` knots on each side.
    pub fn new(range_min: f64, range_max: f64, grid_count: usize, degree: usize) -> Result<Self> {
        if !range_min.is_finite() || !range_max.is_finite() || range_min >= range_max {
            return Err(Error::InvalidRange {
                min: range_min,
                max: range_max,
            });
        }
        if grid_count < 1 {
            return Err(Error::InvalidGrid(grid_count));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidConfig(format!(
                "spline degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let h = (range_max - range_min) / grid_count as f64;
        let knots = (0..grid_count + 2 * degree + 1)
            .map(|i| {
                let offset = i as isize - degree as isize;
                if offset == grid_count as isize {
                    range_max
                } else {
                    range_min + offset as f64 * h
                }
            })
            .collect();
        Ok(Self {
            knots,
            degree,
            grid_count,
            range_min,
            range_max,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid_count(&self) -> usize {
        self.grid_count
    }

    pub fn range_min(&self) -> f64 {
        self.range_min
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn spacing(&self) -> f64 {
        (self.range_max - self.range_min) / self.grid_count as f64
    }

    /// Number of basis functions, `grid_count + degree`.
    pub fn num_basis(&self) -> usize {
        self.grid_count + self.degree
    }

    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            // NaN has no nearer endpoint; pin it to the lower one.
            return self.range_min;
        }
        x.clamp(self.range_min, self.range_max)
    }

    /// True when `x` lies strictly outside the nominal range.
    pub fn is_clamped(&self, x: f64) -> bool {
        !(x >= self.range_min && x <= self.range_max)
    }

    /// Index `i` of the knot interval `[t_i, t_{i+1})` holding the clamped
    /// `x`; always in `degree..grid_count + degree`, with `range_max`
    /// mapped into the last interval.
    fn span(&self, x: f64) -> usize {
        let lo = self.degree;
        let hi = self.degree + self.grid_count - 1;
        let guess = ((x - self.range_min) / self.spacing()).floor();
        let mut span = if guess <= 0.0 {
            lo
        } else {
            (lo + guess as usize).min(hi)
        };
        // Floor of the scaled offset can be one off near a knot.
        if span > lo && x < self.knots[span] {
            span -= 1;
        } else if span < hi && x >= self.knots[span + 1] {
            span += 1;
        }
        span
    }

    /// The `degree + 1` potentially nonzero basis values at `x` (clamped).
    pub fn local_basis(&self, x: f64) -> LocalBasis {
        let x = self.clamp(x);
        let span = self.span(x);
        let mut local = LocalBasis::empty(span - self.degree, self.degree + 1);
        self.triangle(x, span, self.degree, &mut local.values);
        local
    }

    /// Local basis values together with their first derivatives at `x`.
    ///
    /// Outside the nominal range the clamped basis is constant, so the
    /// derivatives are zero there. At the endpoints the one-sided derivative
    /// of the boundary polynomial piece is returned.
    pub fn local_basis_with_derivatives(&self, x: f64) -> Result<(LocalBasis, LocalBasis)> {
        let p = self.degree;
        if p == 0 {
            return Err(Error::UnsupportedDegree);
        }
        let clamped = self.is_clamped(x);
        let x = self.clamp(x);
        let span = self.span(x);
        let first = span - p;

        let mut values = LocalBasis::empty(first, p + 1);
        self.triangle(x, span, p, &mut values.values);

        let mut derivs = LocalBasis::empty(first, p + 1);
        if clamped {
            return Ok((values, derivs));
        }
        // Degree p-1 functions B_{first+1..=span, p-1}; stored in lower[1..=p]
        // so that lower[r] is B_{first + r, p-1} and lower[0] = lower[p+1] = 0.
        let mut lower = [0.0; MAX_DEGREE + 2];
        self.triangle(x, span, p - 1, &mut lower[1..=p]);
        let pf = p as f64;
        for r in 0..=p {
            let i = first + r;
            let mut d = 0.0;
            let left_den = self.knots[i + p] - self.knots[i];
            if left_den != 0.0 {
                d += lower[r] / left_den;
            }
            let right_den = self.knots[i + p + 1] - self.knots[i + 1];
            if right_den != 0.0 {
                d -= lower[r + 1] / right_den;
            }
            derivs.values[r] = pf * d;
        }
        Ok((values, derivs))
    }

    /// Nonzero B-splines of degree `p` on interval `span`, written to
    /// `out[0..=p]` as `B_{span-p}, ..., B_{span}`.
    fn triangle(&self, x: f64, span: usize, p: usize, out: &mut [f64]) {
        let t = &self.knots;
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// All `grid_count + degree` basis values at `x`.
    pub fn basis_values(&self, x: f64) -> Vec<f64> {
        self.local_basis(x).to_dense(self.num_basis())
    }

    /// All basis derivatives `dB_i/dx` at `x`.
    pub fn basis_derivatives(&self, x: f64) -> Result<Vec<f64>> {
        let (_, derivs) = self.local_basis_with_derivatives(x)?;
        Ok(derivs.to_dense(self.num_basis()))
    }
}

/// The contiguous block of basis functions that can be nonzero at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    /// Index of the first function in the block.
    pub first: usize,
    len: usize,
    values: [f64; MAX_DEGREE + 1],
}

impl LocalBasis {
    fn empty(first: usize, len: usize) -> Self {
        Self {
            first,
            len,
            values: [0.0; MAX_DEGREE + 1],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    /// `Σ_r coefficients[first + r] * values[r]`.
    pub fn dot(&self, coefficients: &[f64]) -> f64 {
        self.values()
            .iter()
            .zip(&coefficients[self.first..self.first + self.len])
            .map(|(b, c)| b * c)
            .sum()
    }

    fn to_dense(self, n: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n];
        dense[self.first..self.first + self.len].copy_from_slice(self.values());
        dense
    }
}

/// Coefficients `c_i` of `spline(x) = Σ_i c_i B_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineParams {
    pub coefficients: Vec<f64>,
}

impl SplineParams {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn zeros(knots: &KnotVector) -> Self {
        Self::new(vec![0.0; knots.num_basis()])
    }

    pub fn check(&self, knots: &KnotVector) -> Result<()> {
        if self.coefficients.len() != knots.num_basis() {
            return Err(Error::LengthMismatch {
                expected: knots.num_basis(),
                actual: self.coefficients.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, knots: &KnotVector, x: f64) -> Result<f64> {
        self.check(knots)?;
        Ok(knots.local_basis(x).dot(&self.coefficients))
    }
}
