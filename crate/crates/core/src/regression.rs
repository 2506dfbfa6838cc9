//! Tests for a block of regression coefficients.
//!
//! The nuisance design is projected out through an orthonormal basis of its
//! column space (never an explicit normal-equations inverse), the tested
//! columns are residualized and rescaled to squared norm `n - q` (the mean
//! squared norm of a residualized unit-variance column, which keeps the sum
//! statistic centered), and the partial F building blocks are combined into
//! sum-type, max-type and combo tests.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{require, Error, Result};
use crate::onesample::{centered_max, TestReport};

/// Response, nuisance design and tested design. `q = 0` (an empty nuisance
/// block) is allowed and means no projection.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub y: DVector<f64>,
    pub x_a: DMatrix<f64>,
    pub x_b: DMatrix<f64>,
}

impl RegressionProblem {
    pub fn new(y: DVector<f64>, x_a: DMatrix<f64>, x_b: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        require(x_a.nrows() == n || x_a.ncols() == 0, || {
            Error::DimensionMismatch {
                context: "RegressionProblem: x_a rows",
                expected: n,
                actual: x_a.nrows(),
            }
        })?;
        require(x_b.nrows() == n, || Error::DimensionMismatch {
            context: "RegressionProblem: x_b rows",
            expected: n,
            actual: x_b.nrows(),
        })?;
        require(x_a.ncols() < n, || Error::InvalidParameter {
            name: "q",
            value: x_a.ncols() as f64,
            constraint: "nuisance rank must stay below n",
        })?;
        require(x_b.ncols() >= 1, || Error::InvalidParameter {
            name: "p-q",
            value: 0.0,
            constraint: "at least one tested column is required",
        })?;
        Ok(Self { y, x_a, x_b })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.x_a.ncols()
    }

    /// Number of tested columns, `p - q`.
    pub fn s(&self) -> usize {
        self.x_b.ncols()
    }
}

/// Output of [`residualize`]: the projection basis, the residualized and
/// column-normalized tested design, the residual vector and its variance.
#[derive(Debug, Clone)]
pub struct ResidualizedDesign {
    /// Orthonormal basis `Q` of the nuisance column space (n x q); the
    /// projection acts as `H_a v = Q (Q' v)`.
    basis: DMatrix<f64>,
    /// Residualized tested design, each column scaled to squared norm `n - q`.
    pub x_tilde_b: DMatrix<f64>,
    /// `(I - H_a) y`.
    pub eps_hat: DVector<f64>,
    /// `||eps_hat||^2 / (n - q)`.
    pub sigma2_hat: f64,
    n: usize,
    q: usize,
}

impl ResidualizedDesign {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s(&self) -> usize {
        self.x_tilde_b.ncols()
    }

    /// Apply `I - H_a` to a vector.
    pub fn annihilate(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.q == 0 {
            return v.clone();
        }
        v - &self.basis * (self.basis.transpose() * v)
    }

    /// Dense `H_a = Q Q'`, for diagnostics and tests.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        if self.q == 0 {
            return DMatrix::zeros(self.n, self.n);
        }
        &self.basis * self.basis.transpose()
    }

    /// Conditional covariance estimate `X_tilde_b' X_tilde_b / n` of the
    /// normalized design (diagonal exactly `(n - q) / n` by construction).
    pub fn sigma_hat_ba(&self) -> DMatrix<f64> {
        let gram = self.x_tilde_b.transpose() * &self.x_tilde_b;
        gram / self.n as f64
    }
}

/// Norm ratio below which a residualized column counts as numerically zero.
const COLUMN_DEGENERACY: f64 = 1e-12;

/// Project the response and the tested columns off the nuisance design and
/// normalize each residualized column to squared norm `n - q`.
pub fn residualize(problem: &RegressionProblem) -> Result<ResidualizedDesign> {
    let n = problem.n();
    let q = problem.q();
    let basis = if q == 0 {
        DMatrix::zeros(n, 0)
    } else {
        orthonormal_basis(&problem.x_a)?
    };

    let project = |v: &DVector<f64>| -> DVector<f64> {
        if q == 0 {
            v.clone()
        } else {
            v - &basis * (basis.transpose() * v)
        }
    };

    let eps_hat = project(&problem.y);
    let rss = eps_hat.norm_squared();
    require(
        rss > (COLUMN_DEGENERACY * problem.y.norm()).powi(2),
        || Error::DegenerateResponse,
    )?;
    let sigma2_hat = rss / (n - q) as f64;

    // Residualize and normalize the tested columns. Columns are independent,
    // so this is a parallel loop over the column-major storage.
    let mut x_tilde_b = problem.x_b.clone();
    let qt_xb = if q == 0 {
        DMatrix::zeros(0, x_tilde_b.ncols())
    } else {
        basis.transpose() * &problem.x_b
    };
    let column_status: Vec<Result<()>> = x_tilde_b
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .map(|(j, col)| {
            let original_norm_sq: f64 = col.iter().map(|x| x * x).sum();
            if q > 0 {
                for (i, c) in col.iter_mut().enumerate() {
                    let mut proj = 0.0;
                    for k in 0..q {
                        proj += basis[(i, k)] * qt_xb[(k, j)];
                    }
                    *c -= proj;
                }
            }
            let norm_sq: f64 = col.iter().map(|x| x * x).sum();
            if norm_sq <= COLUMN_DEGENERACY * COLUMN_DEGENERACY * original_norm_sq
                || norm_sq == 0.0
            {
                return Err(Error::ZeroNormColumn { column: j });
            }
            let scale = ((n - q) as f64 / norm_sq).sqrt();
            for c in col.iter_mut() {
                *c *= scale;
            }
            Ok(())
        })
        .collect();
    for status in column_status {
        status?;
    }

    Ok(ResidualizedDesign {
        basis,
        x_tilde_b,
        eps_hat,
        sigma2_hat,
        n,
        q,
    })
}

/// Thin QR basis of the column space; rank deficiency is an error.
fn orthonormal_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..r.nrows()).fold(0.0f64, |m, i| m.max(r[(i, i)].abs()));
    let tol = max_diag * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON * 16.0;
    for i in 0..r.nrows().min(r.ncols()) {
        require(r[(i, i)].abs() > tol, || Error::SingularOperator {
            context: "nuisance design is rank deficient",
        })?;
    }
    Ok(qr.q())
}

/// Partial F values for every tested column:
/// `(y' x_tilde_j)^2 / (x_tilde_j' x_tilde_j)` over `sigma2_hat`, which is
/// invariant to the column normalization.
pub fn partial_f_values(design: &ResidualizedDesign) -> Vec<f64> {
    let w = design.x_tilde_b.transpose() * &design.eps_hat;
    let norm_sq = (design.n - design.q) as f64;
    w.iter()
        .map(|wj| wj * wj / (norm_sq * design.sigma2_hat))
        .collect()
}

/// Max-type statistic: the largest partial F value, centered with
/// `2 log(p - q) - log log(p - q)`.
pub fn t_max_reg(problem: &RegressionProblem) -> Result<(f64, f64)> {
    let design = residualize(problem)?;
    t_max_from_design(&design)
}

pub fn t_max_from_design(design: &ResidualizedDesign) -> Result<(f64, f64)> {
    require(design.s() >= 2, || Error::InvalidParameter {
        name: "p-q",
        value: design.s() as f64,
        constraint: "max statistic needs at least two tested columns",
    })?;
    let raw = partial_f_values(design)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((raw, centered_max(raw, design.s())))
}

/// Ratio-consistent estimator of `tr(Sigma_{b|a}^2)` from the conditional
/// covariance estimate: `n^2 / (r (r+1)) [tr(S^2) - tr(S)^2 / r]`, `r = n - q`.
/// May be negative in finite samples; callers guard.
pub fn trace_estimator(sigma_hat_ba: &DMatrix<f64>, n: usize, q: usize) -> Result<f64> {
    require(n > q, || Error::InvalidParameter {
        name: "n",
        value: n as f64,
        constraint: "trace estimator needs n > q",
    })?;
    require(sigma_hat_ba.nrows() == sigma_hat_ba.ncols(), || {
        Error::DimensionMismatch {
            context: "trace_estimator",
            expected: sigma_hat_ba.nrows(),
            actual: sigma_hat_ba.ncols(),
        }
    })?;
    let tr = sigma_hat_ba.diagonal().sum();
    let tr2 = crate::covmodel::trace_power(sigma_hat_ba, 2)?;
    Ok(trace_estimator_from_traces(tr, tr2, n, q))
}

pub(crate) fn trace_estimator_from_traces(tr: f64, tr2: f64, n: usize, q: usize) -> f64 {
    let r = (n - q) as f64;
    let n = n as f64;
    n * n / (r * (r + 1.0)) * (tr2 - tr * tr / r)
}

/// Sum-type statistic: the centered quadratic form
/// `eps_hat' X_tilde_b X_tilde_b' eps_hat / n`, scaled by the estimated
/// standard deviation `sqrt(2 sigma_hat^4 tr_hat)`.
pub fn t_sum_reg(problem: &RegressionProblem) -> Result<f64> {
    let design = residualize(problem)?;
    t_sum_from_design(&design)
}

pub fn t_sum_from_design(design: &ResidualizedDesign) -> Result<f64> {
    let n = design.n as f64;
    let r = (design.n - design.q) as f64;
    let s = design.s() as f64;
    let w = design.x_tilde_b.transpose() * &design.eps_hat;
    let quad = w.norm_squared() / n;

    // tr(S) = s (n-q)/n exactly after normalization; tr(S^2) via the n x n
    // Gram of the normalized design.
    let tr = s * r / n;
    let tr2 = gram_frobenius_sq(&design.x_tilde_b) / (n * n);
    let tr_hat = trace_estimator_from_traces(tr, tr2, design.n, design.q);
    require(tr_hat > 0.0, || Error::DegenerateDenominator {
        context: "regression sum statistic: trace estimator must be positive",
        value: tr_hat,
        bound: 0.0,
    })?;
    let center = r * s * design.sigma2_hat / n;
    let sd = (2.0 * design.sigma2_hat * design.sigma2_hat * tr_hat).sqrt();
    Ok((quad - center) / sd)
}

/// `||X X'||_F^2` accumulated from the rows of `X` (column-major input).
fn gram_frobenius_sq(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let xt = x.transpose(); // rows become contiguous columns
    let mut frob = 0.0;
    for i in 0..n {
        let ci = xt.column(i);
        let gii = ci.dot(&ci);
        frob += gii * gii;
        for k in (i + 1)..n {
            let gik = ci.dot(&xt.column(k));
            frob += 2.0 * gik * gik;
        }
    }
    frob
}

/// Combined regression test; centering uses `p - q`.
pub fn combo_reg(problem: &RegressionProblem, alpha: f64) -> Result<TestReport> {
    let design = residualize(problem)?;
    let t_sum = t_sum_from_design(&design)?;
    let (_, centered) = t_max_from_design(&design)?;
    TestReport::from_statistics(t_sum, centered, alpha)
}
