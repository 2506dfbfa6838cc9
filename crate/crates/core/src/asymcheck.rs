//! Empirical verification of the limit theorems on synthetic Gaussian
//! vectors: the CLT of the dependent quadratic form, the Gumbel limit of the
//! maximum, their asymptotic independence, and the combined-test null law.
//!
//! For the identity covariance the checks can also be compared against exact
//! finite-p laws (a standardized chi-square and a power of the chi-square(1)
//! cdf), which separates implementation bugs from asymptotic approximation
//! error.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::covmodel::{trace_power, CovarianceMatrix};
use crate::dists::{gumbel_cdf, normal_cdf, RngStream};
use crate::error::{require, Error, Result};
use crate::parallel;

/// Reserved experiment ids so the three checks draw disjoint substreams of
/// the caller's seed.
const CLT_EXPERIMENT: u64 = 0xA51;
const GUMBEL_EXPERIMENT: u64 = 0xA52;
const INDEPENDENCE_EXPERIMENT: u64 = 0xA53;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetLaw {
    Normal,
    Gumbel,
    ComboLaw,
    Independence,
}

impl std::fmt::Display for TargetLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TargetLaw::Normal => "normal",
            TargetLaw::Gumbel => "gumbel",
            TargetLaw::ComboLaw => "combo-law",
            TargetLaw::Independence => "independence",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One cell of the factorization grid: thresholds, the absolute gap
/// `|P(A and B) - P(A) P(B)|` and its binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceCell {
    pub x: f64,
    pub y: f64,
    pub p_joint: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub gap: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceDiagnostics {
    pub levels: Vec<f64>,
    /// Row-major `levels x levels` grid; rows index the x-axis level.
    pub cells: Vec<IndependenceCell>,
}

impl IndependenceDiagnostics {
    pub fn cell(&self, i: usize, j: usize) -> &IndependenceCell {
        &self.cells[i * self.levels.len() + j]
    }

    pub fn max_gap_over_se(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| if c.se > 0.0 { c.gap / c.se } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheckReport {
    pub target_law: TargetLaw,
    pub ks: Option<KsResult>,
    pub sample_size: usize,
    /// Simulated statistic values (the sum statistic for the independence
    /// check; max-statistic values then sit in `samples_max`).
    pub samples: Vec<f64>,
    pub samples_max: Vec<f64>,
    pub independence: Option<IndependenceDiagnostics>,
}

impl LimitCheckReport {
    pub fn ks_statistic(&self) -> f64 {
        self.ks.as_ref().map_or(f64::NAN, |k| k.statistic)
    }

    pub fn ks_pvalue(&self) -> f64 {
        self.ks.as_ref().map_or(f64::NAN, |k| k.p_value)
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`, with
/// the asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(nf.sqrt() * d),
        n,
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        // complement of the theta-function form of the cdf
        let f = std::f64::consts::PI.powi(2) / (8.0 * t * t);
        let sum: f64 = (1..=10)
            .map(|k| (-(((2 * k - 1) * (2 * k - 1)) as f64) * f).exp())
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * sum
    } else {
        let sum: f64 = (1..=10)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * t * t).exp()
            })
            .sum();
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// KS check of precomputed samples against one of the named null laws.
pub fn ks_check(samples: Vec<f64>, law: TargetLaw) -> Result<LimitCheckReport> {
    require(!samples.is_empty(), || Error::InvalidParameter {
        name: "samples",
        value: 0.0,
        constraint: "need at least one sample",
    })?;
    let ks = match law {
        TargetLaw::Normal => ks_test(&samples, normal_cdf),
        TargetLaw::Gumbel => ks_test(&samples, gumbel_cdf),
        TargetLaw::ComboLaw => ks_test(&samples, crate::dists::combo_cdf),
        TargetLaw::Independence => {
            return Err(Error::InvalidParameter {
                name: "law",
                value: 0.0,
                constraint: "independence is not a KS target",
            })
        }
    };
    let n = ks.n;
    Ok(LimitCheckReport {
        target_law: law,
        ks: Some(ks),
        sample_size: n,
        samples,
        samples_max: Vec::new(),
        independence: None,
    })
}

fn validate_check_inputs(sigma: &CovarianceMatrix, reps: usize) -> Result<()> {
    require(reps >= 1, || Error::InvalidParameter {
        name: "reps",
        value: reps as f64,
        constraint: "need at least one replication",
    })?;
    require(sigma.has_unit_diagonal(1e-8), || Error::InvalidParameter {
        name: "sigma",
        value: 0.0,
        constraint: "the limit checks require a unit-diagonal covariance",
    })?;
    Ok(())
}

/// Simulate `(sum, max)` statistic pairs of `Z ~ N(0, sigma)`:
/// `(sum Z_i^2 - p) / sqrt(2 tr(sigma^2))` and
/// `max Z_i^2 - 2 log p + log log p`.
fn simulate_pairs(
    sigma: &CovarianceMatrix,
    reps: usize,
    stream: RngStream,
    experiment: u64,
) -> Result<Vec<(f64, f64)>> {
    let p = sigma.dim();
    require(p >= 2, || Error::InvalidParameter {
        name: "p",
        value: p as f64,
        constraint: "need at least two coordinates",
    })?;
    let tr2 = trace_power(sigma.entries(), 2)?;
    let scale = (2.0 * tr2).sqrt();
    let factor = if sigma.is_identity() {
        None
    } else {
        Some(sigma.sqrt_factor()?)
    };
    let lp = (p as f64).ln();
    let centering = 2.0 * lp - lp.ln();
    let pairs: Vec<(f64, f64)> = parallel::install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream.substream(experiment, rep as u64).rng();
                let mut z = vec![0.0f64; p];
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let (mut sum, mut max) = (0.0f64, f64::NEG_INFINITY);
                match factor {
                    None => {
                        for &zi in &z {
                            let sq = zi * zi;
                            sum += sq;
                            max = max.max(sq);
                        }
                    }
                    Some(l) => {
                        // x = L z, accumulated column-wise over the factor
                        let mut x = vec![0.0f64; p];
                        let ls = l.as_slice(); // column-major
                        for (k, &zk) in z.iter().enumerate() {
                            let col = &ls[k * p..(k + 1) * p];
                            for (xi, &lik) in x.iter_mut().zip(col) {
                                *xi += zk * lik;
                            }
                        }
                        for &xi in &x {
                            let sq = xi * xi;
                            sum += sq;
                            max = max.max(sq);
                        }
                    }
                }
                ((sum - p as f64) / scale, max - centering)
            })
            .collect()
    });
    Ok(pairs)
}

/// CLT of the quadratic form: KS of the standardized sum against `N(0, 1)`.
pub fn clt_check(
    sigma: &CovarianceMatrix,
    reps: usize,
    stream: RngStream,
) -> Result<LimitCheckReport> {
    validate_check_inputs(sigma, reps)?;
    let pairs = simulate_pairs(sigma, reps, stream, CLT_EXPERIMENT)?;
    let samples: Vec<f64> = pairs.iter().map(|&(s, _)| s).collect();
    ks_check(samples, TargetLaw::Normal)
}

/// Gumbel limit of the maximum: KS of the centered max against the
/// `exp(-exp(-x/2)/sqrt(pi))` law.
pub fn gumbel_check(
    sigma: &CovarianceMatrix,
    reps: usize,
    stream: RngStream,
) -> Result<LimitCheckReport> {
    validate_check_inputs(sigma, reps)?;
    let pairs = simulate_pairs(sigma, reps, stream, GUMBEL_EXPERIMENT)?;
    let samples: Vec<f64> = pairs.iter().map(|&(_, m)| m).collect();
    ks_check(samples, TargetLaw::Gumbel)
}

/// Factorization check of the joint law of (sum, max) over a grid of
/// empirical marginal quantiles.
pub fn independence_check(
    sigma: &CovarianceMatrix,
    reps: usize,
    levels: &[f64],
    stream: RngStream,
) -> Result<LimitCheckReport> {
    validate_check_inputs(sigma, reps)?;
    let pairs = simulate_pairs(sigma, reps, stream, INDEPENDENCE_EXPERIMENT)?;
    let sums: Vec<f64> = pairs.iter().map(|&(s, _)| s).collect();
    let maxes: Vec<f64> = pairs.iter().map(|&(_, m)| m).collect();
    let grid = independence_grid(&sums, &maxes, levels)?;
    Ok(LimitCheckReport {
        target_law: TargetLaw::Independence,
        ks: None,
        sample_size: reps,
        samples: sums,
        samples_max: maxes,
        independence: Some(grid),
    })
}

/// Factorization gaps `|P(X <= x_a, Y <= y_b) - P(X <= x_a) P(Y <= y_b)|`
/// over the empirical `levels`-quantiles of each axis, with binomial
/// standard errors for the joint probability under independence.
pub fn independence_grid(
    xs: &[f64],
    ys: &[f64],
    levels: &[f64],
) -> Result<IndependenceDiagnostics> {
    require(xs.len() == ys.len(), || Error::DimensionMismatch {
        context: "independence_grid",
        expected: xs.len(),
        actual: ys.len(),
    })?;
    require(!levels.is_empty(), || Error::InvalidParameter {
        name: "levels",
        value: 0.0,
        constraint: "quantile grid must be nonempty",
    })?;
    let n = xs.len();
    let mut min_level = 1.0f64;
    for &q in levels {
        require(q > 0.0 && q < 1.0, || Error::InvalidParameter {
            name: "levels",
            value: q,
            constraint: "quantile levels must lie in (0, 1)",
        })?;
        min_level = min_level.min(q.min(1.0 - q));
    }
    // every joint cell needs enough expected mass to resolve the gap
    let min_cell = n as f64 * min_level * min_level;
    require(min_cell >= 100.0, || Error::InvalidParameter {
        name: "reps",
        value: n as f64,
        constraint: "too few replications for the grid resolution (need >= 100 per cell)",
    })?;

    let x_thresholds = empirical_quantiles(xs, levels);
    let y_thresholds = empirical_quantiles(ys, levels);
    let mut cells = Vec::with_capacity(levels.len() * levels.len());
    for &x in &x_thresholds {
        for &y in &y_thresholds {
            let mut joint = 0usize;
            let mut cx = 0usize;
            let mut cy = 0usize;
            for i in 0..n {
                let in_x = xs[i] <= x;
                let in_y = ys[i] <= y;
                cx += in_x as usize;
                cy += in_y as usize;
                joint += (in_x && in_y) as usize;
            }
            let p_x = cx as f64 / n as f64;
            let p_y = cy as f64 / n as f64;
            let p_joint = joint as f64 / n as f64;
            let null_p = p_x * p_y;
            cells.push(IndependenceCell {
                x,
                y,
                p_joint,
                p_x,
                p_y,
                gap: (p_joint - null_p).abs(),
                se: (null_p * (1.0 - null_p) / n as f64).sqrt(),
            });
        }
    }
    Ok(IndependenceDiagnostics {
        levels: levels.to_vec(),
        cells,
    })
}

fn empirical_quantiles(xs: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    levels
        .iter()
        .map(|&q| {
            let k = ((q * n as f64).round() as usize).clamp(1, n);
            sorted[k - 1]
        })
        .collect()
}

/// Exact law of the standardized chi-square sum for the identity covariance:
/// `F(t) = P(chi2_p <= p + t sqrt(2p))`.
pub fn standardized_chi2_cdf(p: usize) -> impl Fn(f64) -> f64 {
    let dist = ChiSquared::new(p as f64).expect("positive degrees of freedom");
    let pf = p as f64;
    move |t: f64| dist.cdf(pf + t * (2.0 * pf).sqrt())
}

/// Exact finite-p law of the centered maximum for the identity covariance:
/// `F(t) = P(chi2_1 <= t + 2 log p - log log p)^p`.
pub fn exact_max_chi2_cdf(p: usize) -> impl Fn(f64) -> f64 {
    let dist = ChiSquared::new(1.0).expect("positive degrees of freedom");
    let lp = (p as f64).ln();
    let centering = 2.0 * lp - lp.ln();
    move |t: f64| {
        let arg = t + centering;
        if arg <= 0.0 {
            0.0
        } else {
            dist.cdf(arg).powi(p as i32)
        }
    }
}
