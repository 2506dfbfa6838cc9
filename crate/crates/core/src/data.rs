//! Dense observation matrices.
//!
//! [`DataMatrix`] is the sample container used everywhere: `n` rows of
//! observations over `p` variables, stored row-major so that drawing and
//! transforming one observation at a time stays contiguous.

use nalgebra::DMatrix;

use crate::error::{require, Error, Result};

/// Relative slack used to decide that a sample variance is numerically zero.
/// A constant column whose mean does not round exactly still produces
/// centered residuals of order `eps * max|x|`.
pub(crate) const VARIANCE_DEGENERACY_FACTOR: f64 = 32.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Build from a row-major buffer of length `n * p`.
    pub fn from_row_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        require(n >= 1 && p >= 1, || Error::InvalidParameter {
            name: "shape",
            value: 0.0,
            constraint: "n and p must be positive",
        })?;
        require(values.len() == n * p, || Error::DimensionMismatch {
            context: "DataMatrix::from_row_major",
            expected: n * p,
            actual: values.len(),
        })?;
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        require(!rows.is_empty(), || Error::TooFewObservations {
            context: "DataMatrix::from_rows",
            n: 0,
            min: 1,
        })?;
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            require(r.len() == p, || Error::DimensionMismatch {
                context: "DataMatrix::from_rows (ragged row)",
                expected: p,
                actual: rows[i].len(),
            })?;
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), p, values)
    }

    pub fn zeros(n: usize, p: usize) -> Result<Self> {
        Self::from_row_major(n, p, vec![0.0; n * p])
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column means, one pass over the rows.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.p];
        for i in 0..self.n {
            let row = self.row(i);
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        for m in &mut means {
            *m *= inv;
        }
        means
    }

    /// Per-column sums of squared deviations from `means`, plus the largest
    /// absolute entry per column (used for degeneracy thresholds).
    pub(crate) fn centered_sumsq(&self, means: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut sumsq = vec![0.0; self.p];
        let mut absmax = vec![0.0f64; self.p];
        for i in 0..self.n {
            let row = self.row(i);
            for j in 0..self.p {
                let d = row[j] - means[j];
                sumsq[j] += d * d;
                absmax[j] = absmax[j].max(row[j].abs());
            }
        }
        (sumsq, absmax)
    }

    /// Sample variances with the given divisor. Returns the index of the
    /// first degenerate (numerically constant) column as an error.
    pub fn column_variances(&self, divisor: f64) -> Result<Vec<f64>> {
        let means = self.column_means();
        let (sumsq, absmax) = self.centered_sumsq(&means);
        let mut vars = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let v = sumsq[j] / divisor;
            if is_degenerate_variance(v, absmax[j]) {
                return Err(Error::ZeroVariance { column: j });
            }
            vars.push(v);
        }
        Ok(vars)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n,
            p: self.p,
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.values)
    }
}

/// Sample variance `v` counts as zero when it is indistinguishable from the
/// rounding noise of centering a constant column of magnitude `absmax`.
pub(crate) fn is_degenerate_variance(v: f64, absmax: f64) -> bool {
    let floor = VARIANCE_DEGENERACY_FACTOR * absmax;
    v <= floor * floor
}
