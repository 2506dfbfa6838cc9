//! Command-line front end: run the tests on CSV data, drive Monte Carlo
//! experiments, verify the limit theorems and reproduce the size tables.
//!
//! Exit codes: 0 success, 1 validation error (flags, files, configuration),
//! 2 numerical degeneracy in the statistics. Every failure writes one
//! machine-readable record to standard error. `HDTEST_THREADS` caps the
//! number of Monte Carlo workers without changing any output byte.

mod commands;
mod csvio;
mod error;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::SimOverrides;
use error::CliResult;

#[derive(Parser)]
#[command(name = "hdtest", version, about = "High-dimensional mean and regression-coefficient tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-sample mean test on a CSV of observations (rows) by variables.
    TestOne {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sample mean test on two CSV files with equal column counts.
    TestTwo {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        data2: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regression-coefficient test; `--response`/`--nuisance` partition the
    /// CSV columns into the response, the nuisance block and the tested block.
    TestReg {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        /// Comma-separated columns (names or 0-based indices).
        #[arg(long)]
        nuisance: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one Monte Carlo experiment described by a key=value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma-separated subset of SUM,MAX,COM,HC2,FLY.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection rates over the config's m_values grid (power vs sparsity).
    PowerCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical checks of the limit theorems (CLT, Gumbel, independence).
    CheckAsymptotics {
        #[arg(long, default_value_t = 5000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun one cell of the published size tables
    /// (1 = one-sample, 3 = regression, S1 = two-sample).
    ReproduceTable {
        #[arg(long)]
        table: String,
        /// Cell description, e.g. "I,normal,n=100,p=200" or
        /// "normal,n=100,p=200,q=5".
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::TestOne { data, alpha, out } => commands::test_one(&data, alpha, out.as_ref()),
        Command::TestTwo {
            data,
            data2,
            alpha,
            out,
        } => commands::test_two(&data, &data2, alpha, out.as_ref()),
        Command::TestReg {
            data,
            response,
            nuisance,
            alpha,
            out,
        } => commands::test_reg(&data, &response, nuisance.as_deref(), alpha, out.as_ref()),
        Command::Simulate {
            config,
            seed,
            reps,
            alpha,
            methods,
            out,
        } => commands::simulate(
            &config,
            &SimOverrides {
                seed,
                reps,
                alpha,
                methods,
            },
            out.as_ref(),
        ),
        Command::PowerCurve {
            config,
            seed,
            reps,
            alpha,
            methods,
            out,
        } => commands::power_curve(
            &config,
            &SimOverrides {
                seed,
                reps,
                alpha,
                methods,
            },
            out.as_ref(),
        ),
        Command::CheckAsymptotics { reps, seed, out } => {
            commands::check_asymptotics(reps, seed, out.as_ref())
        }
        Command::ReproduceTable {
            table,
            cell,
            reps,
            seed,
            alpha,
            methods,
            out,
        } => commands::reproduce_table(
            &table,
            &cell,
            reps,
            seed,
            alpha,
            methods.as_deref(),
            out.as_ref(),
        ),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!(
                "error: code=cli-usage exit=1 detail={:?}",
                e.to_string().lines().next().unwrap_or("bad arguments")
            );
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.stderr_record());
        std::process::exit(e.exit_code());
    }
}
