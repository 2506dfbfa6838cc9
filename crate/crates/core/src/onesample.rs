//! One-sample mean tests.
//!
//! All statistics here standardize by sample variances with divisor `n - 1`:
//! the sum statistic's centering constant `(n-1)p/(n-3)` is exactly the mean
//! of a sum of squared t-statistics under that convention, which keeps the
//! null distribution centered at finite samples. The sum statistic aggregates
//! squared standardized means and is asymptotically standard normal; the max
//! statistic is Gumbel after the `2 log p - log log p` centering; the
//! combined test takes the minimum of the two p-values and rejects below
//! `1 - sqrt(1 - alpha)`.

use crate::data::{is_degenerate_variance, DataMatrix};
use crate::dists::{combo_cdf, combo_threshold, gumbel_cdf, normal_pdf, normal_quantile, normal_sf};
use crate::error::{require, Error, Result};

/// Per-problem bundle of the sum statistic, the centered max statistic,
/// the three p-values and the alpha-level decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub t_sum: f64,
    pub t_max_centered: f64,
    pub p_sum: f64,
    pub p_max: f64,
    pub p_combo: f64,
    pub reject_sum: bool,
    pub reject_max: bool,
    pub reject_combo: bool,
    pub alpha: f64,
}

impl TestReport {
    /// Assemble a report from the two statistics. `p_combo` is the smaller
    /// marginal p-value; the combined test rejects below
    /// `1 - sqrt(1 - alpha)`.
    pub fn from_statistics(t_sum: f64, t_max_centered: f64, alpha: f64) -> Result<Self> {
        require(alpha > 0.0 && alpha < 1.0, || Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            constraint: "must lie in (0, 1)",
        })?;
        let p_sum = normal_sf(t_sum);
        let p_max = 1.0 - gumbel_cdf(t_max_centered);
        let p_combo = p_sum.min(p_max);
        Ok(TestReport {
            t_sum,
            t_max_centered,
            p_sum,
            p_max,
            p_combo,
            reject_sum: p_sum < alpha,
            reject_max: p_max < alpha,
            reject_combo: p_combo < combo_threshold(alpha),
            alpha,
        })
    }

    /// P-value of the combined test under its null law `1 - (1 - w)^2`.
    pub fn p_value_combo_law(&self) -> f64 {
        combo_cdf(self.p_combo)
    }
}

/// Column means, variances (divisor `n - 1`) and the centered sums of
/// squares, computed in one pass.
struct Standardized {
    n: usize,
    p: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
    sumsq: Vec<f64>,
}

fn standardize(data: &DataMatrix, min_n: usize, context: &'static str) -> Result<Standardized> {
    let n = data.n_rows();
    let p = data.n_cols();
    require(n >= min_n, || Error::TooFewObservations {
        context,
        n,
        min: min_n,
    })?;
    let means = data.column_means();
    let (sumsq, absmax) = data.centered_sumsq(&means);
    let mut variances = Vec::with_capacity(p);
    for j in 0..p {
        let v = sumsq[j] / (n - 1) as f64;
        if is_degenerate_variance(v, absmax[j]) {
            return Err(Error::ZeroVariance { column: j });
        }
        variances.push(v);
    }
    Ok(Standardized {
        n,
        p,
        means,
        variances,
        sumsq,
    })
}

/// `tr(R_hat^2)` for the sample correlation of `data`, computed through the
/// n x n Gram matrix of the norm-scaled centered columns. The correlation
/// does not depend on the variance divisor, and the p x p matrix is never
/// formed.
fn trace_r2(data: &DataMatrix, std: &Standardized) -> f64 {
    let n = std.n;
    let p = std.p;
    // v[i][j] = (x_ij - mean_j) / ||centered column j||; tr(R^2) = ||V V'||_F^2.
    let mut v = vec![0.0f64; n * p];
    for i in 0..n {
        let row = data.row(i);
        let out = &mut v[i * p..(i + 1) * p];
        for j in 0..p {
            out[j] = (row[j] - std.means[j]) / std.sumsq[j].sqrt();
        }
    }
    let mut frob = 0.0;
    for i in 0..n {
        let ri = &v[i * p..(i + 1) * p];
        // diagonal term once, off-diagonal twice by symmetry
        let gii: f64 = ri.iter().map(|x| x * x).sum();
        frob += gii * gii;
        for k in (i + 1)..n {
            let rk = &v[k * p..(k + 1) * p];
            let gik: f64 = ri.iter().zip(rk).map(|(a, b)| a * b).sum();
            frob += 2.0 * gik * gik;
        }
    }
    frob
}

/// Sum-type statistic: centered and scaled version of
/// `n xbar' D_hat^{-1} xbar`, asymptotically `N(0, 1)` under the null.
pub fn t_sum_one(data: &DataMatrix) -> Result<f64> {
    let std = standardize(data, 4, "one-sample sum statistic")?;
    let n = std.n as f64;
    let p = std.p as f64;
    let quad: f64 = (0..std.p)
        .map(|j| n * std.means[j] * std.means[j] / std.variances[j])
        .sum();
    let tr_r2 = trace_r2(data, &std);
    let bound = p * p / (n - 1.0);
    require(tr_r2 > bound, || Error::DegenerateDenominator {
        context: "one-sample sum statistic: tr(R_hat^2) must exceed p^2/(n-1)",
        value: tr_r2,
        bound,
    })?;
    let center = (n - 1.0) * p / (n - 3.0);
    Ok((quad - center) / (2.0 * (tr_r2 - bound)).sqrt())
}

/// Max-type statistic. Returns `(raw, centered)` where
/// `raw = n max_j xbar_j^2 / var_j` and
/// `centered = raw - 2 log p + log log p`.
pub fn t_max_one(data: &DataMatrix) -> Result<(f64, f64)> {
    let std = standardize(data, 2, "one-sample max statistic")?;
    require(std.p >= 2, || Error::InvalidParameter {
        name: "p",
        value: std.p as f64,
        constraint: "max statistic needs at least two coordinates",
    })?;
    let n = std.n as f64;
    let raw = (0..std.p)
        .map(|j| n * std.means[j] * std.means[j] / std.variances[j])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((raw, centered_max(raw, std.p)))
}

/// Gumbel centering `raw - 2 log p + log log p`.
pub fn centered_max(raw: f64, p: usize) -> f64 {
    let lp = (p as f64).ln();
    raw - 2.0 * lp + lp.ln()
}

/// Combined test: evaluates both statistics and assembles the report.
pub fn combo_one(data: &DataMatrix, alpha: f64) -> Result<TestReport> {
    let t_sum = t_sum_one(data)?;
    let (_, centered) = t_max_one(data)?;
    TestReport::from_statistics(t_sum, centered, alpha)
}

/// Default thresholding grid for [`hc2_statistic`]: twenty equally spaced
/// points `0.0475 k`, k = 1..=20.
pub fn hc2_default_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05 * 0.95).collect()
}

/// Mean normalizer of the thresholded sum at threshold level `lambda`.
pub fn hc2_mu(lambda: f64, p: usize) -> f64 {
    let rl = lambda.sqrt();
    p as f64 * (2.0 * rl * normal_pdf(rl) + 2.0 * normal_sf(rl))
}

/// Variance normalizer of the thresholded sum at threshold level `lambda`.
pub fn hc2_sigma_sq(lambda: f64, p: usize) -> f64 {
    let rl = lambda.sqrt();
    p as f64 * (2.0 * (lambda * rl + 3.0 * rl) * normal_pdf(rl) + 6.0 * normal_sf(rl))
}

/// Thresholding statistic: for each `s` in the grid, the sum of squared
/// standardized means exceeding the `sqrt(2 s log p / n)` threshold is
/// centered and scaled; the statistic is the maximum over the grid.
pub fn hc2_statistic(data: &DataMatrix, grid: &[f64]) -> Result<f64> {
    require(!grid.is_empty(), || Error::InvalidParameter {
        name: "grid",
        value: 0.0,
        constraint: "thresholding grid must be nonempty",
    })?;
    for &s in grid {
        require(s > 0.0 && s < 1.0, || Error::InvalidParameter {
            name: "s",
            value: s,
            constraint: "grid points must lie in (0, 1)",
        })?;
    }
    let std = standardize(data, 2, "thresholding statistic")?;
    let n = std.n as f64;
    let p = std.p;
    let log_p = (p as f64).ln();
    let mut best = f64::NEG_INFINITY;
    for &s in grid {
        let lambda = 2.0 * s * log_p;
        let threshold = (lambda / n).sqrt();
        let mut t2n = 0.0;
        for j in 0..p {
            let sd = std.variances[j].sqrt();
            if std.means[j].abs() >= sd * threshold {
                t2n += n * std.means[j] * std.means[j] / std.variances[j];
            }
        }
        let value = (t2n - hc2_mu(lambda, p)) / hc2_sigma_sq(lambda, p).sqrt();
        best = best.max(value);
    }
    Ok(best)
}

/// Power enhancement statistic `J = J0 + J1`: a screening component that is
/// zero unless some standardized mean clears the `log log n sqrt(log p / n)`
/// threshold, plus the standardized diagonal Wald statistic.
pub fn fly_statistic(data: &DataMatrix) -> Result<(f64, f64, f64)> {
    let std = standardize(data, 3, "power enhancement statistic")?;
    let n = std.n as f64;
    let p = std.p as f64;
    let loglog_n = n.ln().ln();
    require(loglog_n.is_finite() && n.ln() > 0.0, || {
        Error::TooFewObservations {
            context: "power enhancement statistic (log log n)",
            n: std.n,
            min: 3,
        }
    })?;
    let delta = loglog_n * (p.ln() / n).sqrt();
    let mut j0 = 0.0;
    let mut quad = 0.0;
    for j in 0..std.p {
        let ratio_sq = std.means[j] * std.means[j] / std.variances[j];
        quad += n * ratio_sq;
        if std.means[j].abs() > std.variances[j].sqrt() * delta {
            j0 += p.sqrt() * ratio_sq;
        }
    }
    let j1 = (quad - p) / (2.0 * p.sqrt());
    Ok((j0 + j1, j0, j1))
}

/// Asymptotic power of the sum test against a fixed mean, using the
/// population scalings: `Phi(-z_alpha + n mu' D^{-1} mu / sqrt(2 tr(R^2)))`.
pub fn power_sum_theoretical(
    mu: &[f64],
    sigma: &crate::covmodel::CovarianceMatrix,
    n: usize,
    alpha: f64,
) -> Result<f64> {
    require(mu.len() == sigma.dim(), || Error::DimensionMismatch {
        context: "power_sum_theoretical",
        expected: sigma.dim(),
        actual: mu.len(),
    })?;
    let z_alpha = normal_quantile(1.0 - alpha)?;
    let mut quad = 0.0;
    for (j, &m) in mu.iter().enumerate() {
        let v = sigma.entry(j, j);
        require(v > 0.0, || Error::ZeroVariance { column: j })?;
        quad += m * m / v;
    }
    let r = sigma.correlation()?;
    let tr_r2 = crate::covmodel::trace_power(r.entries(), 2)?;
    Ok(crate::dists::normal_cdf(
        -z_alpha + n as f64 * quad / (2.0 * tr_r2).sqrt(),
    ))
}
