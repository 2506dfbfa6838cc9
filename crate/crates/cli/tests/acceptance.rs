//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `--nocapture`). Criteria with Monte Carlo content use fixed
//! seeds; every tolerance is pinned in code.
//!
//! Known honest failures, kept as stated rather than loosened (the measured
//! finite-size values are in the assertion messages):
//! - criterion 4's combined-test slack clause sits ~0.01 below its bound at
//!   m = 20 (the alpha-level vs alpha/2-level power gap plus the positive
//!   sum/max dependence under dense alternatives);
//! - criterion 6's limiting-Gumbel clause: the exact finite-p law at
//!   p = 1000 is ~0.028 away from the Gumbel limit in sup norm, right above
//!   what a 5000-replication KS can accept at the 1% level;
//! - criterion 7: the finite-p factorization gaps at p = 500 are ~0.03-0.05
//!   (roughly 10x the binomial SE) and decay only logarithmically in p.

use std::path::PathBuf;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use hdtest::asymcheck::{clt_check, gumbel_check, independence_check, ks_test};
use hdtest::asymcheck::{exact_max_chi2_cdf, standardized_chi2_cdf};
use hdtest::covmodel::{build_covariance, trace_power, CovarianceSpec, CovarianceMatrix};
use hdtest::data::DataMatrix;
use hdtest::dists::{combo_cdf, combo_threshold, gumbel_cdf, gumbel_quantile, normal_sf, RngStream};
use hdtest::onesample;
use hdtest::regression;
use hdtest::simlab::{run_experiment, run_power_curve, Alternative, Method, Problem, SimConfig};

fn table_config(problem: Problem, n: usize, p: usize, seed: u64) -> SimConfig {
    let mut config = SimConfig::null(problem, n, p, CovarianceSpec::Ar1 { rho: 0.5, p });
    config.reps = 1000;
    config.seed = seed;
    config.methods = vec![Method::Max, Method::Sum, Method::Com];
    config
}

fn check_rate(label: &str, rate: f64, target: f64) {
    assert!(
        (rate - target).abs() <= 0.02,
        "{label}: empirical size {rate} outside {target} +- 0.02"
    );
    println!("  {label}: {rate} (target {target} +- 0.02)");
}

#[test]
fn criterion_01_table1_one_sample_sizes() {
    let config = table_config(Problem::OneSample, 100, 200, 5);
    let report = run_experiment(&config).unwrap();
    check_rate("MAX", report.rate_of(Method::Max).unwrap(), 0.053);
    check_rate("SUM", report.rate_of(Method::Sum).unwrap(), 0.064);
    check_rate("COM", report.rate_of(Method::Com).unwrap(), 0.063);
    println!("criterion 1 (one-sample size reproduction): PASS");
}

#[test]
fn criterion_02_table3_regression_sizes() {
    let mut config = table_config(Problem::Regression, 100, 200, 5);
    config.alternative = Alternative::null_beta();
    let report = run_experiment(&config).unwrap();
    check_rate("MAX", report.rate_of(Method::Max).unwrap(), 0.032);
    check_rate("SUM", report.rate_of(Method::Sum).unwrap(), 0.061);
    check_rate("COM", report.rate_of(Method::Com).unwrap(), 0.044);
    println!("criterion 2 (regression size reproduction): PASS");
}

#[test]
fn criterion_03_table_s1_two_sample_sizes() {
    let config = table_config(Problem::TwoSample, 100, 200, 1);
    let report = run_experiment(&config).unwrap();
    check_rate("MAX", report.rate_of(Method::Max).unwrap(), 0.057);
    check_rate("SUM", report.rate_of(Method::Sum).unwrap(), 0.055);
    check_rate("COM", report.rate_of(Method::Com).unwrap(), 0.057);
    println!("criterion 3 (two-sample size reproduction): PASS");
}

#[test]
fn criterion_04_power_curve_shape() {
    let mut config = table_config(Problem::OneSample, 100, 200, 32);
    config.alternative = Alternative::Mean {
        m: 1,
        total_sq_norm: 0.5,
    };
    let m_values = [1usize, 5, 10, 20];
    let reports = run_power_curve(&config, &m_values).unwrap();
    let rate = |i: usize, m: Method| reports[i].rate_of(m).unwrap();
    let se = |i: usize, m: Method| reports[i].se_of(m).unwrap();
    for (i, &m) in m_values.iter().enumerate() {
        println!(
            "  m = {m}: MAX {} SUM {} COM {}",
            rate(i, Method::Max),
            rate(i, Method::Sum),
            rate(i, Method::Com)
        );
    }
    // MAX decreasing, each adjacent comparison within 2 joint SEs of monotone
    for i in 0..3 {
        let joint_se = (se(i, Method::Max).powi(2) + se(i + 1, Method::Max).powi(2)).sqrt();
        assert!(
            rate(i + 1, Method::Max) - rate(i, Method::Max) <= 2.0 * joint_se,
            "MAX power must decrease in m: {} -> {}",
            rate(i, Method::Max),
            rate(i + 1, Method::Max)
        );
    }
    // SUM weakly increasing under the same tolerance
    for i in 0..3 {
        let joint_se = (se(i, Method::Sum).powi(2) + se(i + 1, Method::Sum).powi(2)).sqrt();
        assert!(
            rate(i, Method::Sum) - rate(i + 1, Method::Sum) <= 2.0 * joint_se,
            "SUM power must not decrease in m: {} -> {}",
            rate(i, Method::Sum),
            rate(i + 1, Method::Sum)
        );
    }
    // combined-test lower bound with 0.03 slack
    for (i, &m) in m_values.iter().enumerate() {
        let best = rate(i, Method::Max).max(rate(i, Method::Sum));
        assert!(
            rate(i, Method::Com) >= best - 0.03,
            "COM {} below max(MAX, SUM) - 0.03 = {} at m = {m} \
             (the long-run gap at m = 20 is about -0.012: alpha-level vs \
             alpha/2-level power difference plus sum/max dependence under \
             the alternative)",
            rate(i, Method::Com),
            best - 0.03
        );
    }
    println!("criterion 4 (power-curve shape): PASS");
}

#[test]
fn criterion_05_clt_exact_chi_square_oracle() {
    let sigma = CovarianceMatrix::identity(500);
    let report = clt_check(&sigma, 5000, RngStream::new(41)).unwrap();
    let exact = ks_test(&report.samples, standardized_chi2_cdf(500));
    println!(
        "  exact-oracle KS: D = {}, p = {}",
        exact.statistic, exact.p_value
    );
    assert!(
        exact.p_value > 0.05,
        "KS against the exact standardized chi2_500 law: D = {}, p = {}",
        exact.statistic,
        exact.p_value
    );
    println!("criterion 5 (quadratic-form CLT, exact oracle): PASS");
}

#[test]
fn criterion_06_gumbel_exact_and_limit_oracle() {
    let sigma = CovarianceMatrix::identity(1000);
    let report = gumbel_check(&sigma, 5000, RngStream::new(42)).unwrap();
    let exact = ks_test(&report.samples, exact_max_chi2_cdf(1000));
    println!(
        "  exact finite-p KS: D = {}, p = {}; limiting-Gumbel KS: D = {}, p = {}",
        exact.statistic,
        exact.p_value,
        report.ks_statistic(),
        report.ks_pvalue()
    );
    assert!(
        exact.p_value > 0.05,
        "KS against the exact finite-p law: D = {}, p = {}",
        exact.statistic,
        exact.p_value
    );
    assert!(
        report.ks_pvalue() > 0.01,
        "KS against the limiting Gumbel: D = {}, p = {} \
         (the exact finite-p law at p = 1000 sits ~0.028 from the Gumbel \
         limit in sup norm, above the ~0.023 a 5000-rep KS accepts at 1%)",
        report.ks_statistic(),
        report.ks_pvalue()
    );
    println!("criterion 6 (Gumbel limit, exact and limiting oracle): PASS");
}

#[test]
fn criterion_07_sum_max_independence_grid() {
    let sigma = build_covariance(&CovarianceSpec::Ar1 { rho: 0.5, p: 500 }, RngStream::new(0))
        .unwrap();
    let report = independence_check(&sigma, 5000, &[0.25, 0.5, 0.75], RngStream::new(43)).unwrap();
    let grid = report.independence.as_ref().unwrap();
    println!(
        "  max factorization gap = {}, max gap / SE = {}",
        grid.cells.iter().map(|c| c.gap).fold(0.0f64, f64::max),
        grid.max_gap_over_se()
    );
    for cell in &grid.cells {
        assert!(
            cell.gap <= 4.0 * cell.se,
            "factorization gap {} exceeds 4 x SE = {} at ({}, {}) \
             (the true finite-p gaps at p = 500 are ~0.03-0.05, about 10x \
             the binomial SE, decaying only logarithmically in p)",
            cell.gap,
            4.0 * cell.se,
            cell.x,
            cell.y
        );
    }
    println!("criterion 7 (sum/max independence factorization): PASS");
}

#[test]
fn criterion_08_combo_null_law() {
    // null combined statistic at n = 200, p = 400, identity covariance
    let combo_values: Vec<f64> = (0..2000)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(48).substream(8, rep as u64).rng();
            let mut data = DataMatrix::zeros(200, 400).unwrap();
            for x in data.as_mut_slice() {
                *x = StandardNormal.sample(&mut rng);
            }
            let t_sum = onesample::t_sum_one(&data).unwrap();
            let (_, centered) = onesample::t_max_one(&data).unwrap();
            normal_sf(t_sum).min(1.0 - gumbel_cdf(centered))
        })
        .collect();
    let ks = ks_test(&combo_values, combo_cdf);
    println!("  combo-law KS: D = {}, p = {}", ks.statistic, ks.p_value);
    assert!(
        ks.p_value > 0.01,
        "KS against 1 - (1-w)^2: D = {}, p = {}",
        ks.statistic,
        ks.p_value
    );
    println!("criterion 8 (combined-test null law): PASS");
}

#[test]
fn criterion_09_hand_oracle_suite() {
    let rel = |got: f64, want: f64| (got - want).abs() <= 1e-9 * want.abs().max(1.0);

    // one-sample sum statistic on the 4 x 2 toy dataset
    let toy = DataMatrix::from_rows(&[
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, -1.0],
    ])
    .unwrap();
    let t = onesample::t_sum_one(&toy).unwrap();
    assert!(rel(t, -3.0 * 3.0f64.sqrt()), "sum statistic {t}");

    // trace estimator hand value
    let est = regression::trace_estimator(&DMatrix::identity(3, 3), 10, 2).unwrap();
    assert!(rel(est, 2.6041666666666667), "trace estimator {est}");

    // gumbel critical value and cdf at zero (exp(-1/sqrt(pi)))
    let q = gumbel_quantile(0.05).unwrap();
    assert!(rel(q, 4.795660612234929), "gumbel quantile {q}");
    let f0 = gumbel_cdf(0.0);
    assert!(rel(f0, 0.5688209418640202), "gumbel cdf at zero {f0}");

    // combined-test threshold
    let thr = combo_threshold(0.05);
    assert!(rel(thr, 0.02532056551910361), "combo threshold {thr}");

    // partial-F toy value
    let y = DVector::from_column_slice(&[1.0, 1.0, -1.0, -1.0]);
    let x_b = DMatrix::from_column_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
    let problem = regression::RegressionProblem::new(y, DMatrix::zeros(4, 0), x_b).unwrap();
    let (raw, _) = regression::t_max_reg(&problem).unwrap();
    assert!(rel(raw, 4.0), "partial F toy {raw}");

    // AR(1) squared trace
    let ar1 = build_covariance(&CovarianceSpec::Ar1 { rho: 0.5, p: 3 }, RngStream::new(0))
        .unwrap();
    let tr2 = trace_power(ar1.entries(), 2).unwrap();
    assert!(rel(tr2, 4.125), "AR(1) tr^2 {tr2}");

    println!("criterion 9 (hand-oracle unit suite): PASS");
}

#[test]
fn criterion_10_trace_estimator_mean_identity() {
    // E[tr(S^2) - tr(S)^2/r] = ((r^2 + r - 2)/n^2) tr(Sigma_{b|a}^2) at
    // n = 50, q = 5, p - q = 20, AR(1) rho = 0.5, 5000 replications.
    // The residualization here is an independent oracle: a QR projection
    // built in the test, applied to the raw (unnormalized) columns.
    let (n, q, s) = (50usize, 5usize, 20usize);
    let sigma = build_covariance(&CovarianceSpec::Ar1 { rho: 0.5, p: s }, RngStream::new(0))
        .unwrap();
    let truth = trace_power(sigma.entries(), 2).unwrap();
    let r = (n - q) as f64;
    let expected = (r * r + r - 2.0) / (n * n) as f64 * truth;
    let factor = sigma.sqrt_factor().unwrap().clone();

    let values: Vec<f64> = (0..5000)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(45).substream(10, rep as u64).rng();
            let mut x_a = DMatrix::<f64>::zeros(n, q);
            for v in x_a.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let mut z = DMatrix::<f64>::zeros(n, s);
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let x_b = z * factor.transpose();
            let qr = x_a.qr();
            let basis = qr.q();
            let x_tilde = &x_b - &basis * (basis.transpose() * &x_b);
            let s_hat = x_tilde.transpose() * &x_tilde / n as f64;
            let tr = s_hat.diagonal().sum();
            let tr2: f64 = s_hat.iter().map(|v| v * v).sum();
            tr2 - tr * tr / r
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len() - 1) as f64)
        .sqrt();
    let mc_se = sd / (values.len() as f64).sqrt();
    println!(
        "  MC mean = {mean}, identity value = {expected}, MC SE = {mc_se}"
    );
    assert!(
        (mean - expected).abs() <= 3.0 * mc_se,
        "MC mean {mean} vs identity {expected} (3 SE = {})",
        3.0 * mc_se
    );
    println!("criterion 10 (trace-estimator mean identity): PASS");
}

#[test]
fn criterion_11_simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("null.cfg");
    std::fs::write(
        &config_path,
        "problem = one-sample\nn = 50\np = 100\nscenario = ar1\nrho = 0.5\n\
         innovation = mixture\nreps = 300\nseed = 9\nmethods = SUM,MAX,COM,HC2,FLY\n",
    )
    .unwrap();
    let run = |threads: &str, out: &PathBuf| {
        let status = Command::new(env!("CARGO_BIN_EXE_hdtest"))
            .args(["simulate", "--config"])
            .arg(&config_path)
            .args(["--seed", "9", "--out"])
            .arg(out)
            .env("HDTEST_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let out1 = dir.path().join("r1.csv");
    let out2 = dir.path().join("r2.csv");
    let out3 = dir.path().join("r3.csv");
    let bytes1 = run("1", &out1);
    let bytes4 = run("4", &out2);
    let again = run("2", &out3);
    assert_eq!(bytes1, bytes4, "worker count changed the output bytes");
    assert_eq!(bytes1, again, "repeated invocation changed the output bytes");
    assert!(!bytes1.is_empty());
    println!("criterion 11 (byte-deterministic simulate): PASS");
}
