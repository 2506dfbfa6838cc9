//! Subcommand implementations. Every report is plain CSV or flat structured
//! text, written to `--out` or standard output; repeated runs with the same
//! seed produce byte-identical bytes.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use hdtest::asymcheck::{self, LimitCheckReport};
use hdtest::covmodel::{build_covariance, CovarianceSpec};
use hdtest::dists::RngStream;
use hdtest::regression::RegressionProblem;
use hdtest::simlab::{
    self, parse_config, parse_innovation, parse_methods, parse_scenario, Alternative, MCReport,
    Method, Problem, SimConfig,
};
use hdtest::twosample::TwoSampleData;
use hdtest::TestReport;

use crate::csvio::{format_value, read_table, resolve_column};
use crate::error::{CliError, CliResult};

pub fn emit(out: Option<&PathBuf>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub const REPORT_HEADER: &str =
    "statistic,centered,p_sum,p_max,p_combo,decision_sum,decision_max,decision_combo,alpha";

fn decision(reject: bool) -> &'static str {
    if reject {
        "reject"
    } else {
        "retain"
    }
}

pub fn report_csv(report: &TestReport) -> String {
    format!(
        "{}\n{},{},{},{},{},{},{},{},{}\n",
        REPORT_HEADER,
        format_value(report.t_sum),
        format_value(report.t_max_centered),
        format_value(report.p_sum),
        format_value(report.p_max),
        format_value(report.p_combo),
        decision(report.reject_sum),
        decision(report.reject_max),
        decision(report.reject_combo),
        report.alpha
    )
}

pub fn test_one(data: &Path, alpha: f64, out: Option<&PathBuf>) -> CliResult<()> {
    let table = read_table(data)?;
    let report = hdtest::onesample::combo_one(&table.data, alpha)?;
    emit(out, &report_csv(&report))
}

pub fn test_two(data: &Path, data2: &Path, alpha: f64, out: Option<&PathBuf>) -> CliResult<()> {
    let first = read_table(data)?;
    let second = read_table(data2)?;
    let pair = TwoSampleData::new(first.data, second.data)?;
    let report = hdtest::twosample::combo_two(&pair, alpha)?;
    emit(out, &report_csv(&report))
}

pub fn test_reg(
    data: &Path,
    response: &str,
    nuisance: Option<&str>,
    alpha: f64,
    out: Option<&PathBuf>,
) -> CliResult<()> {
    let table = read_table(data)?;
    let width = table.data.n_cols();
    let names = table.names.as_deref();
    let y_col = resolve_column(response, names, width)?;
    let mut nuisance_cols = Vec::new();
    if let Some(list) = nuisance {
        for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let idx = resolve_column(token, names, width)?;
            if idx == y_col {
                return Err(CliError::Usage {
                    message: format!("column {idx} is both response and nuisance"),
                });
            }
            if nuisance_cols.contains(&idx) {
                return Err(CliError::Usage {
                    message: format!("duplicate nuisance column {idx}"),
                });
            }
            nuisance_cols.push(idx);
        }
    }
    let tested_cols: Vec<usize> = (0..width)
        .filter(|c| *c != y_col && !nuisance_cols.contains(c))
        .collect();
    if tested_cols.is_empty() {
        return Err(CliError::Usage {
            message: "no tested columns remain after removing response and nuisance".into(),
        });
    }

    let n = table.data.n_rows();
    let mut y = DVector::zeros(n);
    let mut x_a = DMatrix::zeros(n, nuisance_cols.len());
    let mut x_b = DMatrix::zeros(n, tested_cols.len());
    for i in 0..n {
        let row = table.data.row(i);
        y[i] = row[y_col];
        for (k, &c) in nuisance_cols.iter().enumerate() {
            x_a[(i, k)] = row[c];
        }
        for (j, &c) in tested_cols.iter().enumerate() {
            x_b[(i, j)] = row[c];
        }
    }
    let problem = RegressionProblem::new(y, x_a, x_b)?;
    let report = hdtest::regression::combo_reg(&problem, alpha)?;
    emit(out, &report_csv(&report))
}

pub struct SimOverrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub alpha: Option<f64>,
    pub methods: Option<String>,
}

impl SimOverrides {
    fn apply(&self, config: &mut SimConfig) -> CliResult<()> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(reps) = self.reps {
            config.reps = reps;
        }
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(list) = &self.methods {
            config.methods = parse_methods(list)?;
        }
        config.validate()?;
        Ok(())
    }
}

fn read_config(path: &Path) -> CliResult<simlab::ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(parse_config(&text)?)
}

fn mc_csv(reports: &[MCReport]) -> String {
    let mut out = String::from(MCReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

pub fn simulate(config: &Path, overrides: &SimOverrides, out: Option<&PathBuf>) -> CliResult<()> {
    let mut file = read_config(config)?;
    overrides.apply(&mut file.config)?;
    let report = simlab::run_experiment(&file.config)?;
    eprintln!(
        "simulate: {} reps in {:.2}s",
        file.config.reps, report.wall_secs
    );
    emit(out, &mc_csv(std::slice::from_ref(&report)))
}

pub fn power_curve(
    config: &Path,
    overrides: &SimOverrides,
    out: Option<&PathBuf>,
) -> CliResult<()> {
    let mut file = read_config(config)?;
    overrides.apply(&mut file.config)?;
    if file.config.alternative.is_null() {
        return Err(CliError::Usage {
            message: "power curves need total_sq_norm > 0 in the configuration".into(),
        });
    }
    let reports = simlab::run_power_curve(&file.config, &file.m_values)?;
    emit(out, &mc_csv(&reports))
}

fn check_line(name: &str, sigma: &str, p: usize, reps: usize, report: &LimitCheckReport) -> String {
    match &report.independence {
        None => format!(
            "check={name} sigma={sigma} p={p} reps={reps} ks_statistic={} ks_pvalue={}\n",
            report.ks_statistic(),
            report.ks_pvalue()
        ),
        Some(grid) => {
            let max_gap = grid.cells.iter().map(|c| c.gap).fold(0.0f64, f64::max);
            format!(
                "check={name} sigma={sigma} p={p} reps={reps} cells={} max_gap={} max_gap_over_se={}\n",
                grid.cells.len(),
                max_gap,
                grid.max_gap_over_se()
            )
        }
    }
}

/// Standard verification battery: the quadratic-form CLT, the Gumbel limit
/// of the maximum (both against an identity and an AR(1) covariance), and
/// the independence factorization grid.
pub fn check_asymptotics(reps: usize, seed: u64, out: Option<&PathBuf>) -> CliResult<()> {
    let stream = RngStream::new(seed);
    let mut text = String::new();

    let id500 = build_covariance(
        &CovarianceSpec::Explicit {
            matrix: DMatrix::identity(500, 500),
        },
        stream,
    )?;
    let clt = asymcheck::clt_check(&id500, reps, stream)?;
    text.push_str(&check_line("clt", "identity", 500, reps, &clt));

    let id1000 = build_covariance(
        &CovarianceSpec::Explicit {
            matrix: DMatrix::identity(1000, 1000),
        },
        stream,
    )?;
    let gumbel_id = asymcheck::gumbel_check(&id1000, reps, stream)?;
    text.push_str(&check_line("gumbel", "identity", 1000, reps, &gumbel_id));

    let ar1 = build_covariance(&CovarianceSpec::Ar1 { rho: 0.5, p: 500 }, stream)?;
    let gumbel_ar1 = asymcheck::gumbel_check(&ar1, reps, stream)?;
    text.push_str(&check_line("gumbel", "ar1(0.5)", 500, reps, &gumbel_ar1));

    let indep = asymcheck::independence_check(&ar1, reps, &[0.25, 0.5, 0.75], stream)?;
    text.push_str(&check_line("independence", "ar1(0.5)", 500, reps, &indep));

    emit(out, &text)
}

/// Build the experiment behind one cell of the published size tables.
/// Table 1 is the one-sample study, table 3 the regression study and
/// table S1 the two-sample study; a cell reads like `I,normal,n=100,p=200`.
pub fn table_cell_config(
    table: &str,
    cell: &str,
    reps: usize,
    seed: u64,
    alpha: f64,
) -> CliResult<SimConfig> {
    let (problem, methods): (Problem, Vec<Method>) =
        match table.trim().to_ascii_uppercase().as_str() {
            "1" => (
                Problem::OneSample,
                vec![Method::Max, Method::Sum, Method::Com, Method::Hc2, Method::Fly],
            ),
            "3" => (
                Problem::Regression,
                vec![Method::Max, Method::Sum, Method::Com],
            ),
            "S1" => (
                Problem::TwoSample,
                vec![Method::Max, Method::Sum, Method::Com],
            ),
            other => {
                return Err(CliError::Usage {
                    message: format!(
                        "unknown table `{other}` (supported: 1 = one-sample sizes, 3 = regression sizes, S1 = two-sample sizes)"
                    ),
                })
            }
        };

    let mut scenario_tag = String::from("I");
    let mut innovation_tag = String::from("normal");
    let mut n = None;
    let mut p = None;
    let mut q = 0usize;
    for token in cell.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            match key.trim() {
                "n" => n = Some(parse_cell_num(value)?),
                "p" => p = Some(parse_cell_num(value)?),
                "q" => q = parse_cell_num(value)?,
                other => {
                    return Err(CliError::Usage {
                        message: format!("unknown cell key `{other}`"),
                    })
                }
            }
        } else if matches!(token.to_ascii_uppercase().as_str(), "I" | "II" | "III") {
            scenario_tag = token.to_string();
        } else {
            innovation_tag = token.to_string();
        }
    }
    let n = n.ok_or_else(|| CliError::Usage {
        message: "cell must set n=".into(),
    })?;
    let p = p.ok_or_else(|| CliError::Usage {
        message: "cell must set p=".into(),
    })?;

    let scenario = parse_scenario(&scenario_tag, p, 0.5, 0.5, 0.3)?;
    let innovation = parse_innovation(&innovation_tag)?;
    let alternative = match problem {
        Problem::Regression => Alternative::null_beta(),
        _ => Alternative::null_mean(),
    };
    let config = SimConfig {
        problem,
        n,
        n2: None,
        q,
        p,
        scenario,
        innovation,
        alternative,
        alpha,
        reps,
        seed,
        methods,
        redraw_scenario_params: false,
        redraw_coefficients: false,
    };
    config.validate()?;
    Ok(config)
}

fn parse_cell_num<T: std::str::FromStr>(value: &str) -> CliResult<T> {
    value.trim().parse().map_err(|_| CliError::Usage {
        message: format!("bad number `{value}` in cell"),
    })
}

pub fn reproduce_table(
    table: &str,
    cell: &str,
    reps: usize,
    seed: u64,
    alpha: f64,
    methods: Option<&str>,
    out: Option<&PathBuf>,
) -> CliResult<()> {
    let mut config = table_cell_config(table, cell, reps, seed, alpha)?;
    if let Some(list) = methods {
        config.methods = parse_methods(list)?;
        config.validate()?;
    }
    let report = simlab::run_experiment(&config)?;
    emit(out, &mc_csv(std::slice::from_ref(&report)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cells_build_expected_configs() {
        let c = table_cell_config("1", "I,normal,n=100,p=200", 1000, 7, 0.05).unwrap();
        assert_eq!(c.problem, Problem::OneSample);
        assert_eq!(c.n, 100);
        assert_eq!(c.p, 200);
        assert_eq!(c.methods.len(), 5);
        assert!(matches!(c.scenario, CovarianceSpec::Ar1 { rho, .. } if rho == 0.5));

        let c = table_cell_config("3", "normal,n=100,p=200,q=5", 500, 7, 0.05).unwrap();
        assert_eq!(c.problem, Problem::Regression);
        assert_eq!(c.q, 5);

        let c = table_cell_config("S1", "I,t5,n=100,p=200", 500, 7, 0.05).unwrap();
        assert_eq!(c.problem, Problem::TwoSample);

        assert!(table_cell_config("9", "I,normal,n=10,p=20", 10, 0, 0.05).is_err());
        assert!(table_cell_config("1", "I,normal,p=20", 10, 0, 0.05).is_err());
    }
}
