//! Engine-level Monte Carlo properties: worker-count invariance, null-size
//! windows across the scenario/innovation grid, and the dense-alternative
//! degeneracy of the max test.

use hdtest::covmodel::CovarianceSpec;
use hdtest::dists::InnovationKind;
use hdtest::simlab::{run_experiment, Alternative, Method, Problem, SimConfig};

#[test]
fn reports_do_not_depend_on_worker_count() {
    let mut config = SimConfig::null(
        Problem::OneSample,
        40,
        30,
        CovarianceSpec::SpikedFactor { p: 30 },
    );
    config.reps = 200;
    config.seed = 314;
    config.methods = vec![Method::Sum, Method::Max, Method::Com, Method::Hc2, Method::Fly];

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = single.install(|| run_experiment(&config)).unwrap();
    let b = many.install(|| run_experiment(&config)).unwrap();
    assert_eq!(a.csv_rows(), b.csv_rows());
}

#[test]
fn null_sizes_stay_in_window_across_scenarios_and_innovations() {
    // nine cells at n = 100, p = 200; window alpha +- (3 SE + 0.015)
    let reps = 400;
    let scenarios = [
        CovarianceSpec::Ar1 { rho: 0.5, p: 200 },
        CovarianceSpec::SpikedFactor { p: 200 },
        CovarianceSpec::spatial_rook_default(200),
    ];
    let innovations = [
        InnovationKind::StdNormal,
        InnovationKind::standardized_t(3).unwrap(),
        InnovationKind::mixture_default(),
    ];
    for (si, scenario) in scenarios.iter().enumerate() {
        for (ki, innovation) in innovations.iter().enumerate() {
            let mut config = SimConfig::null(Problem::OneSample, 100, 200, scenario.clone());
            config.innovation = *innovation;
            config.reps = reps;
            config.seed = 7_000 + (si * 3 + ki) as u64;
            let report = run_experiment(&config).unwrap();
            for result in &report.results {
                let window = 3.0 * result.se + 0.015;
                assert!(
                    (result.rate - config.alpha).abs() <= window,
                    "{} size {} outside {} +- {} for scenario {si}, innovation {ki}",
                    result.method,
                    result.rate,
                    config.alpha,
                    window
                );
            }
        }
    }
}

#[test]
fn max_test_degenerates_under_dense_weak_alternatives() {
    // delta = n^{-0.6}, m = ceil(sqrt(p) n^{0.2}): the per-coordinate signal
    // is far below the detection threshold, so the max test keeps roughly
    // its size while the sum test gains power. n = 200 keeps the max test's
    // own finite-sample size close to alpha.
    let n = 200usize;
    let p = 200usize;
    let delta = (n as f64).powf(-0.6);
    let m = ((p as f64).sqrt() * (n as f64).powf(0.2)).ceil() as usize;
    let total_sq_norm = m as f64 * delta * delta;
    let mut config = SimConfig::null(
        Problem::OneSample,
        n,
        p,
        CovarianceSpec::Explicit {
            matrix: nalgebra::DMatrix::identity(p, p),
        },
    );
    config.alternative = Alternative::Mean { m, total_sq_norm };
    config.reps = 1000;
    config.seed = 2718;
    let report = run_experiment(&config).unwrap();
    let max_rate = report.rate_of(Method::Max).unwrap();
    assert!(
        (0.02..=0.10).contains(&max_rate),
        "max-test power {max_rate} should collapse to the vicinity of alpha"
    );
    let sum_rate = report.rate_of(Method::Sum).unwrap();
    assert!(
        sum_rate > max_rate + 0.03,
        "sum test should dominate in the dense case: SUM {sum_rate} vs MAX {max_rate}"
    );
}

#[test]
fn power_curve_reports_are_deterministic() {
    let mut config = SimConfig::null(
        Problem::OneSample,
        30,
        20,
        CovarianceSpec::Ar1 { rho: 0.5, p: 20 },
    );
    config.alternative = Alternative::Mean {
        m: 1,
        total_sq_norm: 0.5,
    };
    config.reps = 100;
    config.seed = 11;
    let a = hdtest::simlab::run_power_curve(&config, &[1, 4]).unwrap();
    let b = hdtest::simlab::run_power_curve(&config, &[1, 4]).unwrap();
    let rows = |reports: &[hdtest::simlab::MCReport]| {
        reports.iter().map(|r| r.csv_rows()).collect::<String>()
    };
    assert_eq!(rows(&a), rows(&b));
    // the first grid point coincides with a standalone run of the same m
    let standalone = run_experiment(&{
        let mut c = config.clone();
        c.alternative = Alternative::Mean {
            m: 1,
            total_sq_norm: 0.5,
        };
        c
    })
    .unwrap();
    assert_eq!(a[0].csv_rows(), standalone.csv_rows());
}
