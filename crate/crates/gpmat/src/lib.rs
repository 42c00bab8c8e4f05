//! Generalized precision matrices (GPM) for heavy-tailed return data.
//!
//! The inverse sample covariance is the textbook precision matrix, but for
//! non-Gaussian data it only captures partial correlation. This crate
//! evaluates the local dependence function (LDF) of the multivariate
//! t-Student distribution, the mixed second partials of the log-density,
//! and averages it into a family of generalized precision matrices:
//!
//! * signed GPM: negated mean LDF, the direct generalization of `Σ⁻¹`,
//! * absolute GPM: mean of elementwise `|LDF|`, whose zeros characterize
//!   conditional independence beyond the Gaussian case,
//! * region GPM: the same average restricted to a tail region of one
//!   variable pair,
//! * Taylor GPM: a third-order moment expansion built from the Mori
//!   kurtosis matrix.
//!
//! On top of the estimators sits a minimum-variance portfolio harness:
//! rolling-window backtests, out-of-sample risk/return/turnover metrics,
//! a studentized circular-block-bootstrap variance test, wealth curves and
//! Frobenius stability series, plus loaders for generic return panels and
//! the Kenneth French daily industry files.

// `!(x > 0.0)` guards reject NaN along with nonpositive values; `x <= 0.0`
// would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod gpm;
pub mod ldf;
pub mod numerics;
pub mod portfolio;
pub mod util;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
