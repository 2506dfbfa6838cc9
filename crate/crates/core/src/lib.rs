//! Sum-type, max-type and combined tests for high-dimensional means and
//! regression coefficients, together with a deterministic Monte Carlo lab.
//!
//! The crate is organized around the three testing problems:
//!
//! - [`onesample`]: one-sample mean tests (sum, max, combo, plus the HC2
//!   thresholding and power-enhancement baselines);
//! - [`twosample`]: two-sample mean tests with a pooled covariance;
//! - [`regression`]: tests for a block of regression coefficients built from
//!   partial-F statistics.
//!
//! Supporting modules: [`covmodel`] (covariance scenarios and matrix
//! utilities), [`dists`] (reproducible random streams, innovation samplers
//! and the null reference laws), [`asymcheck`] (empirical verification of the
//! limit theorems), and [`simlab`] (the Monte Carlo engine behind size tables
//! and power curves).

pub mod asymcheck;
pub mod covmodel;
pub mod data;
pub mod dists;
pub mod error;
pub mod onesample;
mod parallel;
pub mod regression;
pub mod simlab;
pub mod twosample;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use onesample::TestReport;
