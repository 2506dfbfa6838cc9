//! Covariance scenarios, matrix square roots and trace utilities.
//!
//! Three parametric scenarios are supported besides explicit matrices: an
//! AR(1) correlation structure, a spiked-factor model with random variances,
//! and a spatial model driven by a rook-form contiguity matrix. Random
//! scenario parameters are drawn from a caller-supplied stream so one
//! experiment can fix them across replications.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;

use crate::data::{is_degenerate_variance, DataMatrix};
use crate::dists::RngStream;
use crate::error::{require, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// `Sigma_ij = rho^|i-j|`.
    Ar1 { rho: f64, p: usize },
    /// `Sigma = D^{1/2} R D^{1/2}` with `u_i ~ U(1,2)` variances and
    /// `R = I + bb' - diag(b^2)`, the first `floor(p^0.3)` entries of `b`
    /// drawn from `U(0.7, 0.9)` and the rest zero.
    SpikedFactor { p: usize },
    /// `Sigma = gg' + (I - rho W)^{-1} (I - rho W')^{-1}` with `W` in rook
    /// form and `g` supported on the first `floor(p^delta_gamma)` entries,
    /// drawn from `U(0.7, 0.9)`.
    SpatialRook {
        p: usize,
        rho_eps: f64,
        delta_gamma: f64,
    },
    Explicit { matrix: DMatrix<f64> },
}

impl CovarianceSpec {
    pub fn spatial_rook_default(p: usize) -> Self {
        CovarianceSpec::SpatialRook {
            p,
            rho_eps: 0.5,
            delta_gamma: 0.3,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::Ar1 { p, .. }
            | CovarianceSpec::SpikedFactor { p }
            | CovarianceSpec::SpatialRook { p, .. } => *p,
            CovarianceSpec::Explicit { matrix } => matrix.nrows(),
        }
    }
}

/// A realized dense symmetric covariance matrix with a lazily computed
/// square-root factor. Immutable after construction; the lazy factor is
/// computed at most once even under concurrent first access.
#[derive(Debug)]
pub struct CovarianceMatrix {
    dim: usize,
    entries: DMatrix<f64>,
    identity: bool,
    sqrt: OnceLock<Result<DMatrix<f64>>>,
}

impl Clone for CovarianceMatrix {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.clone(),
            identity: self.identity,
            sqrt: OnceLock::new(),
        }
    }
}

impl CovarianceMatrix {
    /// Wrap a symmetric matrix. Symmetry must hold exactly; builders in this
    /// module fill both triangles from one computed value.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        require(entries.nrows() == entries.ncols(), || {
            Error::DimensionMismatch {
                context: "CovarianceMatrix::new",
                expected: entries.nrows(),
                actual: entries.ncols(),
            }
        })?;
        let mut max_asym = 0.0f64;
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                max_asym = max_asym.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        require(max_asym == 0.0, || Error::NotSymmetric {
            max_asymmetry: max_asym,
        })?;
        let p = entries.nrows();
        let identity =
            (0..p).all(|i| (0..p).all(|j| entries[(i, j)] == if i == j { 1.0 } else { 0.0 }));
        Ok(Self {
            dim: p,
            entries,
            identity,
            sqrt: OnceLock::new(),
        })
    }

    pub fn identity(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p)).expect("identity is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn has_unit_diagonal(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (self.entries[(i, i)] - 1.0).abs() <= tol)
    }

    /// Symmetric square root `L` with `L L' = Sigma`, via eigendecomposition
    /// with negative eigenvalues clamped to zero. Fails if an eigenvalue
    /// falls below `-1e-10 * max|Sigma_ij|`.
    pub fn sqrt_factor(&self) -> Result<&DMatrix<f64>> {
        self.sqrt
            .get_or_init(|| compute_sqrt_factor(&self.entries))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Population correlation matrix `D^{-1/2} Sigma D^{-1/2}` with an exact
    /// unit diagonal.
    pub fn correlation(&self) -> Result<CovarianceMatrix> {
        correlation_of(self)
    }
}

fn compute_sqrt_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    let max_abs = sigma.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-10 * max_abs;
    let eigen = sigma.clone().symmetric_eigen();
    let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    require(min_eig >= -tol, || Error::NotPositiveSemidefinite {
        min_eigenvalue: min_eig,
        tolerance: tol,
    })?;
    // L = U diag(lambda^{1/2}) U' realized as W W' with W = U diag(lambda^{1/4}),
    // so the factor comes out exactly symmetric.
    let mut w = eigen.eigenvectors;
    for j in 0..p {
        let root = eigen.eigenvalues[j].max(0.0).powf(0.25);
        for i in 0..p {
            w[(i, j)] *= root;
        }
    }
    Ok(symmetric_gram(&w))
}

/// `W W'` filled from one dot product per (i, j) pair, hence exactly symmetric.
fn symmetric_gram(w: &DMatrix<f64>) -> DMatrix<f64> {
    let p = w.nrows();
    let wt = w.transpose(); // rows of W become contiguous columns
    let mut out = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = wt.column(i).dot(&wt.column(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Realize a covariance scenario. Random parameters come from `stream`.
pub fn build_covariance(spec: &CovarianceSpec, stream: RngStream) -> Result<CovarianceMatrix> {
    match spec {
        CovarianceSpec::Ar1 { rho, p } => build_ar1(*rho, *p),
        CovarianceSpec::SpikedFactor { p } => build_spiked_factor(*p, stream),
        CovarianceSpec::SpatialRook {
            p,
            rho_eps,
            delta_gamma,
        } => build_spatial_rook(*p, *rho_eps, *delta_gamma, stream),
        CovarianceSpec::Explicit { matrix } => CovarianceMatrix::new(matrix.clone()),
    }
}

fn check_dim(p: usize) -> Result<()> {
    require(p >= 2, || Error::InvalidParameter {
        name: "p",
        value: p as f64,
        constraint: "scenario dimension must be at least 2",
    })
}

fn build_ar1(rho: f64, p: usize) -> Result<CovarianceMatrix> {
    check_dim(p)?;
    require(rho.abs() < 1.0, || Error::InvalidParameter {
        name: "rho",
        value: rho,
        constraint: "must lie in (-1, 1)",
    })?;
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = rho.powi((j - i) as i32);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(m)
}

/// Number of supported entries, `floor(p^exponent)` clamped to `[1, p]`.
fn support_size(p: usize, exponent: f64) -> usize {
    ((p as f64).powf(exponent).floor() as usize).clamp(1, p)
}

fn build_spiked_factor(p: usize, stream: RngStream) -> Result<CovarianceMatrix> {
    check_dim(p)?;
    let mut rng = stream.rng();
    let u: Vec<f64> = (0..p).map(|_| rng.random_range(1.0..2.0)).collect();
    let k = support_size(p, 0.3);
    let mut b = vec![0.0; p];
    for bi in b.iter_mut().take(k) {
        *bi = rng.random_range(0.7..0.9);
    }
    // R = I + bb' - diag(b^2): unit diagonal written exactly, off-diagonal b_i b_j.
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        m[(i, i)] = u[i];
        for j in (i + 1)..p {
            let v = (u[i] * u[j]).sqrt() * (b[i] * b[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(m)
}

/// Rook-form contiguity matrix: `w_{i+1,i} = w_{i-1,i} = 0.5` for interior
/// columns, `w_{1,2} = w_{p,p-1} = 1`, all other entries zero.
pub fn rook_matrix(p: usize) -> Result<DMatrix<f64>> {
    check_dim(p)?;
    let mut w = DMatrix::zeros(p, p);
    for i1 in 0..p.saturating_sub(2) {
        w[(i1 + 1, i1)] = 0.5;
    }
    for i2 in 2..p {
        w[(i2 - 1, i2)] = 0.5;
    }
    w[(0, 1)] = 1.0;
    w[(p - 1, p - 2)] = 1.0;
    Ok(w)
}

fn build_spatial_rook(
    p: usize,
    rho_eps: f64,
    delta_gamma: f64,
    stream: RngStream,
) -> Result<CovarianceMatrix> {
    check_dim(p)?;
    let mut rng = stream.rng();
    let k = support_size(p, delta_gamma);
    let mut gamma = vec![0.0; p];
    for g in gamma.iter_mut().take(k) {
        *g = rng.random_range(0.7..0.9);
    }
    let w = rook_matrix(p)?;
    let m = DMatrix::identity(p, p) - rho_eps * w;
    let inv = m.try_inverse().ok_or(Error::SingularOperator {
        context: "(I - rho W) in the spatial rook scenario",
    })?;
    // gg' + N N' with N = (I - rho W)^{-1}; both terms symmetric by the way
    // they are filled.
    let mut sigma = symmetric_gram(&inv);
    for i in 0..p {
        for j in i..p {
            let v = sigma[(i, j)] + gamma[i] * gamma[j];
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(sigma)
}

/// `tr(A^k)` for `k` in 1..=4. `tr(A^2)` is the entrywise product sum, and
/// `k = 3, 4` use a single matrix product.
pub fn trace_power(a: &DMatrix<f64>, k: u32) -> Result<f64> {
    require(a.nrows() == a.ncols(), || Error::DimensionMismatch {
        context: "trace_power",
        expected: a.nrows(),
        actual: a.ncols(),
    })?;
    match k {
        1 => Ok(a.diagonal().sum()),
        2 => {
            let mut t = 0.0;
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    t += a[(i, j)] * a[(j, i)];
                }
            }
            Ok(t)
        }
        3 | 4 => {
            let b = a * a;
            let mut t = 0.0;
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    t += if k == 3 {
                        b[(i, j)] * a[(j, i)]
                    } else {
                        b[(i, j)] * b[(j, i)]
                    };
                }
            }
            Ok(t)
        }
        _ => Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            constraint: "trace power supports k in 1..=4",
        }),
    }
}

/// Divisor convention for sample covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovDivisor {
    /// Divide by `n`.
    SampleSize,
    /// Divide by `n - 1`.
    SampleSizeMinusOne,
}

/// Sample covariance of the rows of `data` under the chosen divisor.
pub fn sample_covariance(data: &DataMatrix, divisor: CovDivisor) -> Result<CovarianceMatrix> {
    let n = data.n_rows();
    require(n >= 2, || Error::TooFewObservations {
        context: "sample_covariance",
        n,
        min: 2,
    })?;
    let div = match divisor {
        CovDivisor::SampleSize => n as f64,
        CovDivisor::SampleSizeMinusOne => (n - 1) as f64,
    };
    let means = data.column_means();
    centered_cross_products(&[(data, &means)], div)
}

/// Pooled covariance of two samples: both centered at their own means,
/// cross-products divided by `n1 + n2`.
pub fn pooled_covariance(
    sample1: &DataMatrix,
    sample2: &DataMatrix,
) -> Result<CovarianceMatrix> {
    require(sample1.n_cols() == sample2.n_cols(), || {
        Error::DimensionMismatch {
            context: "pooled_covariance",
            expected: sample1.n_cols(),
            actual: sample2.n_cols(),
        }
    })?;
    let n = sample1.n_rows() + sample2.n_rows();
    require(sample1.n_rows() >= 2 && sample2.n_rows() >= 2, || {
        Error::TooFewObservations {
            context: "pooled_covariance",
            n,
            min: 4,
        }
    })?;
    let m1 = sample1.column_means();
    let m2 = sample2.column_means();
    centered_cross_products(&[(sample1, &m1), (sample2, &m2)], n as f64)
}

fn centered_cross_products(
    parts: &[(&DataMatrix, &Vec<f64>)],
    divisor: f64,
) -> Result<CovarianceMatrix> {
    let p = parts[0].0.n_cols();
    let mut acc = DMatrix::<f64>::zeros(p, p);
    let mut centered = vec![0.0; p];
    for (data, means) in parts {
        for i in 0..data.n_rows() {
            let row = data.row(i);
            for j in 0..p {
                centered[j] = row[j] - means[j];
            }
            for j in 0..p {
                let cj = centered[j];
                for (k, ck) in centered.iter().enumerate().skip(j) {
                    acc[(j, k)] += cj * ck;
                }
            }
        }
    }
    let inv = 1.0 / divisor;
    for j in 0..p {
        for k in j..p {
            let v = acc[(j, k)] * inv;
            acc[(j, k)] = v;
            acc[(k, j)] = v;
        }
    }
    CovarianceMatrix::new(acc)
}

/// Correlation matrix `D^{-1/2} C D^{-1/2}` with an exact unit diagonal.
/// Coordinates whose variance is numerically zero (relative to the largest
/// diagonal entry) make the correlation undefined.
pub fn correlation_of(cov: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let p = cov.dim();
    let max_diag = (0..p).fold(0.0f64, |m, i| m.max(cov.entry(i, i)));
    let mut inv_sd = vec![0.0; p];
    for (i, slot) in inv_sd.iter_mut().enumerate() {
        let v = cov.entry(i, i);
        if v <= 0.0 || is_degenerate_variance(v, max_diag.sqrt()) {
            return Err(Error::ZeroVariance { column: i });
        }
        *slot = 1.0 / v.sqrt();
    }
    let mut r = DMatrix::zeros(p, p);
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let v = cov.entry(i, j) * inv_sd[i] * inv_sd[j];
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(r)
}
