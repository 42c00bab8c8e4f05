//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A pivot of the Cholesky factorization fell below the scale-relative
    /// tolerance; the matrix is singular or indefinite at working precision.
    /// Typical cause: a degenerate window (n < d or collinear assets).
    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A finite-difference stencil evaluated the log-density outside its
    /// finite support.
    #[error("non-finite log-density at stencil point ({context})")]
    NonFiniteDensity { context: String },

    /// `1ᵀΩ1` vanished, so the minimum-variance weights are undefined.
    #[error("degenerate denominator in minimum-variance weights (1'Ω1 ≈ 0)")]
    DegenerateDenominator,

    /// A return series fed to the variance test has zero variance.
    #[error("degenerate variance: series {which} is constant")]
    DegenerateVariance { which: &'static str },

    /// A compounded return of −100% or worse makes the wealth curve
    /// meaningless from that point on.
    #[error("bankruptcy: period return at index {index} is <= -1")]
    Bankruptcy { index: usize },

    #[error("parse error at {path}:{line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-positive price at {path}:{line}, column {column}: {value}")]
    NonPositivePrice {
        path: String,
        line: usize,
        column: usize,
        value: f64,
    },

    #[error("dates not strictly increasing at {path}:{line}: {date}")]
    UnsortedDates {
        path: String,
        line: usize,
        date: String,
    },

    #[error("unrecognized layout in {path}: {message}")]
    UnrecognizedLayout { path: String, message: String },

    #[error("estimator kinds do not match: {a} vs {b}")]
    KindMismatch { a: String, b: String },

    #[error("estimation failed in backtest window {window}: {source}")]
    WindowFailed {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn not_pd(context: impl Into<String>) -> Self {
        Error::NotPositiveDefinite {
            context: context.into(),
        }
    }

    pub(crate) fn dim(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected,
            got,
            context: context.into(),
        }
    }
}
