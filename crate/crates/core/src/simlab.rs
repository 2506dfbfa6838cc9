//! Monte Carlo engine for size tables and power curves.
//!
//! Every replication draws from a substream keyed by `(experiment,
//! replication)`, so adding or removing methods never perturbs the data, and
//! rejection tallies are integers merged associatively: reports are
//! byte-identical for any worker count. Random scenario parameters and
//! regression nuisance coefficients are drawn once per experiment from
//! reserved substreams; flags switch them to per-replication draws.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covmodel::{build_covariance, CovarianceMatrix, CovarianceSpec};
use crate::data::DataMatrix;
use crate::dists::{combo_threshold, gumbel_cdf, normal_sf, InnovationKind, RngStream, StreamRng};
use crate::error::{require, Error, Result};
use crate::onesample;
use crate::parallel;
use crate::regression::{self, RegressionProblem};
use crate::twosample::{self, TwoSampleData};

/// Reserved experiment id for per-seed parameter streams.
const PARAM_EXPERIMENT: u64 = u64::MAX;
const SCENARIO_PARAM_STREAM: u64 = 0;
const COEFFICIENT_STREAM: u64 = 1;
/// Reserved replication id for the per-experiment alternative draw.
const ALTERNATIVE_STREAM: u64 = u64::MAX;
/// High bits marking per-replication parameter streams (replication indices
/// stay far below these).
const REP_SCENARIO_FLAG: u64 = 1 << 63;
const REP_COEFFICIENT_FLAG: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    OneSample,
    TwoSample,
    Regression,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Problem::OneSample => "one-sample",
            Problem::TwoSample => "two-sample",
            Problem::Regression => "regression",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sum,
    Max,
    Com,
    Hc2,
    Fly,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Sum => "SUM",
            Method::Max => "MAX",
            Method::Com => "COM",
            Method::Hc2 => "HC2",
            Method::Fly => "FLY",
        };
        write!(f, "{name}")
    }
}

impl Method {
    pub fn parse(token: &str) -> Result<Self> {
        match token.trim().to_ascii_uppercase().as_str() {
            "SUM" => Ok(Method::Sum),
            "MAX" => Ok(Method::Max),
            "COM" => Ok(Method::Com),
            "HC2" => Ok(Method::Hc2),
            "FLY" => Ok(Method::Fly),
            other => Err(Error::Config {
                message: format!("unknown method `{other}`"),
            }),
        }
    }
}

/// Alternative hypothesis description. `total_sq_norm = 0` is the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alternative {
    /// First `m` mean entries set to `sqrt(total_sq_norm / m)`.
    Mean { m: usize, total_sq_norm: f64 },
    /// First `m` tested coefficients drawn `N(0, 1)`, rescaled so the
    /// squared norm equals `total_sq_norm`.
    Beta { m: usize, total_sq_norm: f64 },
}

impl Alternative {
    pub fn null_mean() -> Self {
        Alternative::Mean {
            m: 0,
            total_sq_norm: 0.0,
        }
    }

    pub fn null_beta() -> Self {
        Alternative::Beta {
            m: 0,
            total_sq_norm: 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.total_sq_norm() == 0.0
    }

    pub fn m(&self) -> usize {
        match *self {
            Alternative::Mean { m, .. } | Alternative::Beta { m, .. } => m,
        }
    }

    pub fn total_sq_norm(&self) -> f64 {
        match *self {
            Alternative::Mean { total_sq_norm, .. }
            | Alternative::Beta { total_sq_norm, .. } => total_sq_norm,
        }
    }

    pub fn with_m(&self, m: usize) -> Self {
        match *self {
            Alternative::Mean { total_sq_norm, .. } => Alternative::Mean { m, total_sq_norm },
            Alternative::Beta { total_sq_norm, .. } => Alternative::Beta { m, total_sq_norm },
        }
    }
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub problem: Problem,
    pub n: usize,
    /// Second sample size for the two-sample problem; `None` means `n`.
    pub n2: Option<usize>,
    /// Nuisance dimension for the regression problem.
    pub q: usize,
    pub p: usize,
    pub scenario: CovarianceSpec,
    pub innovation: InnovationKind,
    pub alternative: Alternative,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Redraw random scenario parameters per replication instead of fixing
    /// them per experiment.
    pub redraw_scenario_params: bool,
    /// Redraw the regression nuisance coefficients per replication.
    pub redraw_coefficients: bool,
}

impl SimConfig {
    /// Null configuration with problem-appropriate defaults.
    pub fn null(problem: Problem, n: usize, p: usize, scenario: CovarianceSpec) -> Self {
        let alternative = match problem {
            Problem::Regression => Alternative::null_beta(),
            _ => Alternative::null_mean(),
        };
        SimConfig {
            problem,
            n,
            n2: None,
            q: 0,
            p,
            scenario,
            innovation: InnovationKind::StdNormal,
            alternative,
            alpha: 0.05,
            reps: 1000,
            seed: 0,
            methods: vec![Method::Sum, Method::Max, Method::Com],
            redraw_scenario_params: false,
            redraw_coefficients: false,
        }
    }

    pub fn n2(&self) -> usize {
        self.n2.unwrap_or(self.n)
    }

    /// Number of tested coordinates: `p` for the mean problems, `p - q` for
    /// regression.
    pub fn tested_dim(&self) -> usize {
        match self.problem {
            Problem::Regression => self.p - self.q,
            _ => self.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.alpha > 0.0 && self.alpha < 1.0, || {
            Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                constraint: "must lie in (0, 1)",
            }
        })?;
        require(self.reps >= 1, || Error::InvalidParameter {
            name: "reps",
            value: self.reps as f64,
            constraint: "need at least one replication",
        })?;
        require(self.p >= 2, || Error::InvalidParameter {
            name: "p",
            value: self.p as f64,
            constraint: "need at least two coordinates",
        })?;
        require(self.scenario.dim() == self.p, || Error::DimensionMismatch {
            context: "SimConfig: scenario dimension vs p",
            expected: self.p,
            actual: self.scenario.dim(),
        })?;
        require(!self.methods.is_empty(), || Error::Config {
            message: "at least one method is required".into(),
        })?;
        for m in &self.methods {
            let compatible = match self.problem {
                Problem::OneSample => true,
                _ => matches!(m, Method::Sum | Method::Max | Method::Com),
            };
            require(compatible, || Error::Config {
                message: format!("method {m} is only available for the one-sample problem"),
            })?;
        }
        match self.problem {
            Problem::OneSample => {
                require(self.n >= 4, || Error::TooFewObservations {
                    context: "one-sample experiment",
                    n: self.n,
                    min: 4,
                })?;
                require(matches!(self.alternative, Alternative::Mean { .. }), || {
                    Error::Config {
                        message: "one-sample experiments take a mean alternative".into(),
                    }
                })?;
            }
            Problem::TwoSample => {
                require(
                    self.n >= 2 && self.n2() >= 2 && self.n + self.n2() >= 5,
                    || Error::TooFewObservations {
                        context: "two-sample experiment",
                        n: self.n + self.n2(),
                        min: 5,
                    },
                )?;
                require(matches!(self.alternative, Alternative::Mean { .. }), || {
                    Error::Config {
                        message: "two-sample experiments take a mean alternative".into(),
                    }
                })?;
            }
            Problem::Regression => {
                require(self.q < self.n, || Error::InvalidParameter {
                    name: "q",
                    value: self.q as f64,
                    constraint: "nuisance dimension must stay below n",
                })?;
                require(self.q < self.p, || Error::InvalidParameter {
                    name: "q",
                    value: self.q as f64,
                    constraint: "nuisance dimension must stay below p",
                })?;
                require(matches!(self.alternative, Alternative::Beta { .. }), || {
                    Error::Config {
                        message: "regression experiments take a coefficient alternative".into(),
                    }
                })?;
            }
        }
        let m = self.alternative.m();
        require(
            self.alternative.is_null() || (m >= 1 && m <= self.tested_dim()),
            || Error::InvalidParameter {
                name: "m",
                value: m as f64,
                constraint: "nonzero alternatives need 1 <= m <= tested dimension",
            },
        )?;
        require(self.alternative.total_sq_norm() >= 0.0, || {
            Error::InvalidParameter {
                name: "total_sq_norm",
                value: self.alternative.total_sq_norm(),
                constraint: "must be nonnegative",
            }
        })?;
        Ok(())
    }
}

/// Rejection tally for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub rejections: u64,
    pub rate: f64,
    pub se: f64,
}

/// Result of one experiment: the configuration echo and per-method rates.
#[derive(Debug, Clone)]
pub struct MCReport {
    pub config: SimConfig,
    pub experiment_index: u64,
    pub results: Vec<MethodResult>,
    pub wall_secs: f64,
}

impl MCReport {
    pub const CSV_HEADER: &'static str =
        "problem,scenario,innovation,n,p,q,m,method,rate,se,reps,seed";

    pub fn rate_of(&self, method: Method) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.method == method)
            .map(|r| r.rate)
    }

    pub fn se_of(&self, method: Method) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.method == method)
            .map(|r| r.se)
    }

    /// One CSV row per method. Wall time is deliberately excluded so repeated
    /// runs are byte-identical.
    pub fn csv_rows(&self) -> String {
        let c = &self.config;
        let n = if c.problem == Problem::TwoSample && c.n2() != c.n {
            format!("{}/{}", c.n, c.n2())
        } else {
            c.n.to_string()
        };
        let m = if c.alternative.is_null() {
            0
        } else {
            c.alternative.m()
        };
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.problem,
                scenario_label(&c.scenario),
                innovation_label(&c.innovation),
                n,
                c.p,
                c.q,
                m,
                r.method,
                r.rate,
                r.se,
                c.reps,
                c.seed
            ));
        }
        out
    }
}

pub fn scenario_label(spec: &CovarianceSpec) -> String {
    match spec {
        CovarianceSpec::Ar1 { rho, .. } => format!("ar1({rho})"),
        CovarianceSpec::SpikedFactor { .. } => "spiked-factor".into(),
        CovarianceSpec::SpatialRook {
            rho_eps,
            delta_gamma,
            ..
        } => format!("spatial-rook({rho_eps},{delta_gamma})"),
        CovarianceSpec::Explicit { matrix } => format!("explicit(p={})", matrix.nrows()),
    }
}

pub fn innovation_label(kind: &InnovationKind) -> String {
    match kind {
        InnovationKind::StdNormal => "normal".into(),
        InnovationKind::ScaledT { df, .. } => format!("t({df})"),
        InnovationKind::MixtureNormal { weight, .. } => {
            if *weight == 0.1 {
                "mixture".into()
            } else {
                format!("mixture({weight})")
            }
        }
        InnovationKind::CenteredExp => "centered-exp".into(),
    }
}

// ---------------------------------------------------------------------------
// Sampling plan
// ---------------------------------------------------------------------------

/// How rows `x = Sigma^{1/2} z` are realized. Gaussian innovations under the
/// AR(1) scenario admit an exact O(p) stationary recursion with the same law;
/// every other case multiplies by the symmetric square root, the transform
/// that defines the data law for non-Gaussian innovations.
enum SampleFactor {
    Identity,
    Ar1Gaussian { rho: f64 },
    Dense(DMatrix<f64>),
}

impl SampleFactor {
    fn new(
        spec: &CovarianceSpec,
        sigma: &CovarianceMatrix,
        innovation: InnovationKind,
    ) -> Result<Self> {
        if sigma.is_identity() {
            return Ok(SampleFactor::Identity);
        }
        if let (CovarianceSpec::Ar1 { rho, .. }, InnovationKind::StdNormal) = (spec, innovation) {
            return Ok(SampleFactor::Ar1Gaussian { rho: *rho });
        }
        Ok(SampleFactor::Dense(sigma.sqrt_factor()?.clone()))
    }

    /// Fill `data` with rows `mu + factor(z)`, `z` i.i.d. `innovation`.
    fn fill(
        &self,
        data: &mut DataMatrix,
        innovation: InnovationKind,
        mu: Option<&[f64]>,
        rng: &mut StreamRng,
        scratch: &mut Vec<f64>,
    ) {
        let p = data.n_cols();
        for i in 0..data.n_rows() {
            let row = data.row_mut(i);
            match self {
                SampleFactor::Identity => innovation.fill(row, rng),
                SampleFactor::Ar1Gaussian { rho } => {
                    innovation.fill(row, rng);
                    let c = (1.0 - rho * rho).sqrt();
                    let mut prev = row[0];
                    for x in row.iter_mut().skip(1) {
                        prev = rho * prev + c * *x;
                        *x = prev;
                    }
                }
                SampleFactor::Dense(l) => {
                    scratch.resize(p, 0.0);
                    innovation.fill(scratch, rng);
                    row.fill(0.0);
                    let ls = l.as_slice(); // column-major
                    for (k, &zk) in scratch.iter().enumerate() {
                        let col = &ls[k * p..(k + 1) * p];
                        for (x, &lik) in row.iter_mut().zip(col) {
                            *x += zk * lik;
                        }
                    }
                }
            }
            if let Some(mu) = mu {
                for (x, &m) in row.iter_mut().zip(mu) {
                    *x += m;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct Thresholds {
    alpha: f64,
    combo: f64,
    /// Critical value for the thresholding statistic, from the standard
    /// Gumbel law `exp(-e^{-x})` of a standardized maximum.
    hc2: f64,
}

impl Thresholds {
    fn new(alpha: f64) -> Self {
        Thresholds {
            alpha,
            combo: combo_threshold(alpha),
            hc2: -(-(1.0f64 - alpha).ln()).ln(),
        }
    }
}

/// Run one experiment and tally rejection rates per method.
pub fn run_experiment(config: &SimConfig) -> Result<MCReport> {
    config.validate()?;
    parallel::install(|| run_indexed(config, 0))
}

/// One experiment per entry of `m_values`, sharing the scenario realization;
/// the signal is rescaled from `total_sq_norm` for each `m`.
pub fn run_power_curve(config: &SimConfig, m_values: &[usize]) -> Result<Vec<MCReport>> {
    require(!m_values.is_empty(), || Error::Config {
        message: "power curve needs at least one m value".into(),
    })?;
    parallel::install(|| {
        m_values
            .iter()
            .enumerate()
            .map(|(idx, &m)| {
                let mut sub = config.clone();
                sub.alternative = config.alternative.with_m(m);
                sub.validate()?;
                run_indexed(&sub, idx as u64)
            })
            .collect()
    })
}

fn run_indexed(config: &SimConfig, experiment: u64) -> Result<MCReport> {
    let start = Instant::now();
    let base = RngStream::new(config.seed);
    let thresholds = Thresholds::new(config.alpha);
    let hc2_grid = onesample::hc2_default_grid();

    let shared_factor = if config.redraw_scenario_params {
        None
    } else {
        let sigma = build_covariance(
            &config.scenario,
            base.substream(PARAM_EXPERIMENT, SCENARIO_PARAM_STREAM),
        )?;
        Some(SampleFactor::new(
            &config.scenario,
            &sigma,
            config.innovation,
        )?)
    };

    let fixed_beta_a = match config.problem {
        Problem::Regression if config.q > 0 && !config.redraw_coefficients => {
            let mut rng = base.substream(PARAM_EXPERIMENT, COEFFICIENT_STREAM).rng();
            Some(standard_normal_vec(config.q, &mut rng))
        }
        _ => None,
    };

    let alt_vector = match config.alternative {
        Alternative::Mean { m, total_sq_norm } => mean_vector(config.p, m, total_sq_norm),
        Alternative::Beta { m, total_sq_norm } => {
            let mut rng = base.substream(experiment, ALTERNATIVE_STREAM).rng();
            beta_vector(config.tested_dim(), m, total_sq_norm, &mut rng)
        }
    };

    let masks = (0..config.reps)
        .into_par_iter()
        .map(|rep| -> Result<u8> {
            let rep = rep as u64;
            let mut rng = base.substream(experiment, rep).rng();

            let local_factor;
            let factor = match &shared_factor {
                Some(f) => f,
                None => {
                    let sigma = build_covariance(
                        &config.scenario,
                        base.substream(experiment, REP_SCENARIO_FLAG | rep),
                    )?;
                    local_factor =
                        SampleFactor::new(&config.scenario, &sigma, config.innovation)?;
                    &local_factor
                }
            };

            let local_beta_a;
            let beta_a = if config.problem == Problem::Regression && config.q > 0 {
                if config.redraw_coefficients {
                    let mut coeff_rng = base
                        .substream(experiment, REP_COEFFICIENT_FLAG | rep)
                        .rng();
                    local_beta_a = standard_normal_vec(config.q, &mut coeff_rng);
                    Some(local_beta_a.as_slice())
                } else {
                    fixed_beta_a.as_deref()
                }
            } else {
                None
            };

            run_replication(config, factor, beta_a, &alt_vector, &thresholds, &hc2_grid, &mut rng)
        })
        .collect::<Result<Vec<u8>>>()?;

    let mut results = Vec::with_capacity(config.methods.len());
    for (k, &method) in config.methods.iter().enumerate() {
        let rejections = masks.iter().filter(|&&m| m & (1 << k) != 0).count() as u64;
        let rate = rejections as f64 / config.reps as f64;
        results.push(MethodResult {
            method,
            rejections,
            rate,
            se: (rate * (1.0 - rate) / config.reps as f64).sqrt(),
        });
    }
    Ok(MCReport {
        config: config.clone(),
        experiment_index: experiment,
        results,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_replication(
    config: &SimConfig,
    factor: &SampleFactor,
    beta_a: Option<&[f64]>,
    alt_vector: &[f64],
    thresholds: &Thresholds,
    hc2_grid: &[f64],
    rng: &mut StreamRng,
) -> Result<u8> {
    let mut scratch = Vec::new();
    match config.problem {
        Problem::OneSample => {
            let mut data = DataMatrix::zeros(config.n, config.p)?;
            let mu = (!config.alternative.is_null()).then_some(alt_vector);
            factor.fill(&mut data, config.innovation, mu, rng, &mut scratch);
            eval_one_sample(&data, &config.methods, thresholds, hc2_grid)
        }
        Problem::TwoSample => {
            let mut sample1 = DataMatrix::zeros(config.n, config.p)?;
            let mu = (!config.alternative.is_null()).then_some(alt_vector);
            factor.fill(&mut sample1, config.innovation, mu, rng, &mut scratch);
            let mut sample2 = DataMatrix::zeros(config.n2(), config.p)?;
            factor.fill(&mut sample2, config.innovation, None, rng, &mut scratch);
            let data = TwoSampleData::new(sample1, sample2)?;
            eval_two_sample(&data, &config.methods, thresholds)
        }
        Problem::Regression => {
            let mut x = DataMatrix::zeros(config.n, config.p)?;
            factor.fill(&mut x, config.innovation, None, rng, &mut scratch);
            let problem = build_regression_problem(config, &x, beta_a, alt_vector, rng);
            eval_regression(&problem, &config.methods, thresholds)
        }
    }
}

/// Split the covariates into nuisance and tested blocks and form the
/// response `y = X_a beta_a + X_b beta_b + eps` with standard normal errors.
fn build_regression_problem(
    config: &SimConfig,
    x: &DataMatrix,
    beta_a: Option<&[f64]>,
    beta_b: &[f64],
    rng: &mut StreamRng,
) -> RegressionProblem {
    let n = config.n;
    let q = config.q;
    let s = config.p - q;
    let mut x_a = DMatrix::zeros(n, q);
    let mut x_b = DMatrix::zeros(n, s);
    for i in 0..n {
        let row = x.row(i);
        for k in 0..q {
            x_a[(i, k)] = row[k];
        }
        for j in 0..s {
            x_b[(i, j)] = row[q + j];
        }
    }
    let mut y = nalgebra::DVector::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        let mut v: f64 = StandardNormal.sample(rng);
        if let Some(ba) = beta_a {
            for (k, &b) in ba.iter().enumerate() {
                v += row[k] * b;
            }
        }
        if !config.alternative.is_null() {
            for (j, &b) in beta_b.iter().enumerate() {
                v += row[q + j] * b;
            }
        }
        y[i] = v;
    }
    RegressionProblem::new(y, x_a, x_b).expect("simulated dimensions are consistent")
}

fn eval_one_sample(
    data: &DataMatrix,
    methods: &[Method],
    thresholds: &Thresholds,
    hc2_grid: &[f64],
) -> Result<u8> {
    let need_sum = methods
        .iter()
        .any(|m| matches!(m, Method::Sum | Method::Com | Method::Fly));
    let need_max = methods.iter().any(|m| matches!(m, Method::Max | Method::Com));
    let p_sum = if need_sum {
        Some(normal_sf(onesample::t_sum_one(data)?))
    } else {
        None
    };
    let p_max = if need_max {
        let (_, centered) = onesample::t_max_one(data)?;
        Some(1.0 - gumbel_cdf(centered))
    } else {
        None
    };
    let mut bits = 0u8;
    for (k, method) in methods.iter().enumerate() {
        let reject = match method {
            Method::Sum => p_sum.unwrap() < thresholds.alpha,
            Method::Max => p_max.unwrap() < thresholds.alpha,
            Method::Com => p_sum.unwrap().min(p_max.unwrap()) < thresholds.combo,
            Method::Hc2 => onesample::hc2_statistic(data, hc2_grid)? > thresholds.hc2,
            Method::Fly => {
                let (j, _, _) = onesample::fly_statistic(data)?;
                normal_sf(j) < thresholds.alpha
            }
        };
        bits |= (reject as u8) << k;
    }
    Ok(bits)
}

fn eval_two_sample(
    data: &TwoSampleData,
    methods: &[Method],
    thresholds: &Thresholds,
) -> Result<u8> {
    let need_sum = methods.iter().any(|m| matches!(m, Method::Sum | Method::Com));
    let need_max = methods.iter().any(|m| matches!(m, Method::Max | Method::Com));
    let p_sum = if need_sum {
        Some(normal_sf(twosample::t_sum_two(data)?))
    } else {
        None
    };
    let p_max = if need_max {
        let (_, centered) = twosample::t_max_two(data)?;
        Some(1.0 - gumbel_cdf(centered))
    } else {
        None
    };
    decide_sum_max_com(methods, thresholds, p_sum, p_max)
}

fn eval_regression(
    problem: &RegressionProblem,
    methods: &[Method],
    thresholds: &Thresholds,
) -> Result<u8> {
    let design = regression::residualize(problem)?;
    let need_sum = methods.iter().any(|m| matches!(m, Method::Sum | Method::Com));
    let need_max = methods.iter().any(|m| matches!(m, Method::Max | Method::Com));
    let p_sum = if need_sum {
        Some(normal_sf(regression::t_sum_from_design(&design)?))
    } else {
        None
    };
    let p_max = if need_max {
        let (_, centered) = regression::t_max_from_design(&design)?;
        Some(1.0 - gumbel_cdf(centered))
    } else {
        None
    };
    decide_sum_max_com(methods, thresholds, p_sum, p_max)
}

fn decide_sum_max_com(
    methods: &[Method],
    thresholds: &Thresholds,
    p_sum: Option<f64>,
    p_max: Option<f64>,
) -> Result<u8> {
    let mut bits = 0u8;
    for (k, method) in methods.iter().enumerate() {
        let reject = match method {
            Method::Sum => p_sum.unwrap() < thresholds.alpha,
            Method::Max => p_max.unwrap() < thresholds.alpha,
            Method::Com => p_sum.unwrap().min(p_max.unwrap()) < thresholds.combo,
            _ => unreachable!("validated: only SUM/MAX/COM reach here"),
        };
        bits |= (reject as u8) << k;
    }
    Ok(bits)
}

fn standard_normal_vec(len: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn mean_vector(p: usize, m: usize, total_sq_norm: f64) -> Vec<f64> {
    let mut mu = vec![0.0; p];
    if total_sq_norm > 0.0 && m > 0 {
        let delta = (total_sq_norm / m as f64).sqrt();
        for v in mu.iter_mut().take(m) {
            *v = delta;
        }
    }
    mu
}

fn beta_vector(s: usize, m: usize, total_sq_norm: f64, rng: &mut StreamRng) -> Vec<f64> {
    let mut beta = vec![0.0; s];
    if total_sq_norm > 0.0 && m > 0 {
        let draws = standard_normal_vec(m, rng);
        let norm_sq: f64 = draws.iter().map(|x| x * x).sum();
        let scale = (total_sq_norm / norm_sq).sqrt();
        for (b, d) in beta.iter_mut().zip(&draws) {
            *b = scale * d;
        }
    }
    beta
}

// ---------------------------------------------------------------------------
// Flat key=value configuration text
// ---------------------------------------------------------------------------

/// Parsed configuration file: the experiment plus the `m` grid used by power
/// curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub config: SimConfig,
    pub m_values: Vec<usize>,
}

/// Parse flat `key = value` text (one pair per line, `#` comments).
///
/// Required keys: `problem`, `n`, `p`, `scenario`, `innovation`, `reps`.
/// Optional: `n2`, `q`, `rho`, `rho_eps`, `delta_gamma`, `m`,
/// `total_sq_norm`, `alpha`, `seed`, `methods`, `m_values`,
/// `redraw_scenario_params`, `redraw_coefficients`.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            message: format!("line {}: expected key = value, got `{line}`", lineno + 1),
        })?;
        map.insert(key.trim(), value.trim());
    }

    let known = [
        "problem",
        "n",
        "n2",
        "q",
        "p",
        "scenario",
        "rho",
        "rho_eps",
        "delta_gamma",
        "innovation",
        "m",
        "total_sq_norm",
        "alpha",
        "reps",
        "seed",
        "methods",
        "m_values",
        "redraw_scenario_params",
        "redraw_coefficients",
    ];
    for key in map.keys() {
        require(known.contains(key), || Error::Config {
            message: format!("unknown configuration key `{key}`"),
        })?;
    }

    let get = |key: &str| -> Result<&str> {
        map.get(key).copied().ok_or_else(|| Error::Config {
            message: format!("missing configuration key `{key}`"),
        })
    };
    let problem = match get("problem")?.to_ascii_lowercase().as_str() {
        "one-sample" | "onesample" | "one" => Problem::OneSample,
        "two-sample" | "twosample" | "two" => Problem::TwoSample,
        "regression" | "reg" => Problem::Regression,
        other => {
            return Err(Error::Config {
                message: format!("unknown problem `{other}`"),
            })
        }
    };
    let n: usize = parse_num(get("n")?, "n")?;
    let p: usize = parse_num(get("p")?, "p")?;
    let reps: usize = parse_num(get("reps")?, "reps")?;
    let n2 = map.get("n2").map(|v| parse_num(v, "n2")).transpose()?;
    let q = map.get("q").map(|v| parse_num(v, "q")).transpose()?.unwrap_or(0);
    let rho = map
        .get("rho")
        .map(|v| parse_num(v, "rho"))
        .transpose()?
        .unwrap_or(0.5);
    let rho_eps = map
        .get("rho_eps")
        .map(|v| parse_num(v, "rho_eps"))
        .transpose()?
        .unwrap_or(0.5);
    let delta_gamma = map
        .get("delta_gamma")
        .map(|v| parse_num(v, "delta_gamma"))
        .transpose()?
        .unwrap_or(0.3);
    let scenario = parse_scenario(get("scenario")?, p, rho, rho_eps, delta_gamma)?;
    let innovation = parse_innovation(get("innovation")?)?;
    let m = map.get("m").map(|v| parse_num(v, "m")).transpose()?.unwrap_or(0);
    let total_sq_norm = map
        .get("total_sq_norm")
        .map(|v| parse_num(v, "total_sq_norm"))
        .transpose()?
        .unwrap_or(0.0);
    let alternative = match problem {
        Problem::Regression => Alternative::Beta { m, total_sq_norm },
        _ => Alternative::Mean { m, total_sq_norm },
    };
    let alpha = map
        .get("alpha")
        .map(|v| parse_num(v, "alpha"))
        .transpose()?
        .unwrap_or(0.05);
    let seed = map
        .get("seed")
        .map(|v| parse_num(v, "seed"))
        .transpose()?
        .unwrap_or(0u64);
    let methods = match map.get("methods") {
        Some(list) => parse_methods(list)?,
        None => vec![Method::Sum, Method::Max, Method::Com],
    };
    let m_values = match map.get("m_values") {
        Some(list) => parse_m_values(list)?,
        None => (1..=20).collect(),
    };
    let redraw_scenario_params = map
        .get("redraw_scenario_params")
        .map(|v| parse_bool(v))
        .transpose()?
        .unwrap_or(false);
    let redraw_coefficients = map
        .get("redraw_coefficients")
        .map(|v| parse_bool(v))
        .transpose()?
        .unwrap_or(false);

    let config = SimConfig {
        problem,
        n,
        n2,
        q,
        p,
        scenario,
        innovation,
        alternative,
        alpha,
        reps,
        seed,
        methods,
        redraw_scenario_params,
        redraw_coefficients,
    };
    config.validate()?;
    Ok(ConfigFile { config, m_values })
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        message: format!("bad value `{value}` for key `{key}`"),
    })
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config {
            message: format!("bad boolean `{other}`"),
        }),
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Result<Vec<Method>> = list
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(Method::parse)
        .collect();
    let methods = methods?;
    require(!methods.is_empty(), || Error::Config {
        message: "empty method list".into(),
    })?;
    Ok(methods)
}

fn parse_m_values(list: &str) -> Result<Vec<usize>> {
    let mut values = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = token.split_once("..") {
            let a: usize = parse_num(a.trim(), "m_values")?;
            let b: usize = parse_num(b.trim(), "m_values")?;
            require(a >= 1 && b >= a, || Error::Config {
                message: format!("bad m range `{token}`"),
            })?;
            values.extend(a..=b);
        } else {
            values.push(parse_num(token, "m_values")?);
        }
    }
    require(!values.is_empty(), || Error::Config {
        message: "empty m_values list".into(),
    })?;
    Ok(values)
}

/// Parse a scenario tag. Roman numerals map to the three named scenarios.
pub fn parse_scenario(
    tag: &str,
    p: usize,
    rho: f64,
    rho_eps: f64,
    delta_gamma: f64,
) -> Result<CovarianceSpec> {
    match tag.to_ascii_lowercase().as_str() {
        "ar1" | "i" => Ok(CovarianceSpec::Ar1 { rho, p }),
        "spiked-factor" | "spiked" | "ii" => Ok(CovarianceSpec::SpikedFactor { p }),
        "spatial-rook" | "spatial" | "rook" | "iii" => Ok(CovarianceSpec::SpatialRook {
            p,
            rho_eps,
            delta_gamma,
        }),
        "identity" => Ok(CovarianceSpec::Explicit {
            matrix: DMatrix::identity(p, p),
        }),
        other => Err(Error::Config {
            message: format!("unknown scenario `{other}`"),
        }),
    }
}

/// Parse an innovation tag: `normal`, `t(df)`, `mixture`, `centered-exp`.
pub fn parse_innovation(tag: &str) -> Result<InnovationKind> {
    let t = tag.trim().to_ascii_lowercase();
    match t.as_str() {
        "normal" | "gaussian" => return Ok(InnovationKind::StdNormal),
        "mixture" | "mixture-normal" => return Ok(InnovationKind::mixture_default()),
        "exp" | "centered-exp" | "exponential" => return Ok(InnovationKind::CenteredExp),
        _ => {}
    }
    let df_token = t
        .strip_prefix("t(")
        .and_then(|s| s.strip_suffix(')'))
        .or_else(|| t.strip_prefix('t'));
    if let Some(df_token) = df_token {
        let df: u32 = parse_num(df_token, "innovation")?;
        return InnovationKind::standardized_t(df);
    }
    Err(Error::Config {
        message: format!("unknown innovation `{tag}`"),
    })
}
