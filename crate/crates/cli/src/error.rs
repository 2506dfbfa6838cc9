//! CLI error wrapper with the exit-code contract: 0 success, 1 validation
//! (bad flags, malformed files, bad configuration), 2 numerical degeneracy
//! reported by the core statistics.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Core(hdtest::Error),
    Csv {
        path: String,
        message: String,
    },
    Io {
        path: String,
        message: String,
    },
    Usage {
        message: String,
    },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Csv { .. } => "csv-format",
            CliError::Io { .. } => "io",
            CliError::Usage { .. } => "cli-usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_degenerate() => 2,
            _ => 1,
        }
    }

    /// One machine-readable record on standard error.
    pub fn stderr_record(&self) -> String {
        format!(
            "error: code={} exit={} detail={:?}",
            self.code(),
            self.exit_code(),
            self.to_string()
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Csv { path, message } => write!(f, "{path}: {message}"),
            CliError::Io { path, message } => write!(f, "{path}: {message}"),
            CliError::Usage { message } => write!(f, "{message}"),
        }
    }
}

impl From<hdtest::Error> for CliError {
    fn from(e: hdtest::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
