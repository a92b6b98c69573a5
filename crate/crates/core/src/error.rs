use thiserror::Error;

/// Errors raised by the analytic chain, the estimators and the file readers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are individually valid but mutually inconsistent.
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    /// A histogram does not contain enough complete repetition periods.
    #[error("histogram spans {available} complete side peaks per side, need at least {required}")]
    InsufficientSpan { available: usize, required: usize },

    /// The reference (uncorrelated) peak area vanished after background subtraction.
    #[error("reference side-peak area is zero")]
    ZeroReference,

    /// No secure key can be produced even without any channel loss.
    #[error("no secure key at zero distance (SK = {sk:.3e} <= delta = {delta:.1e})")]
    NoKeyAtZeroDistance { sk: f64, delta: f64 },

    /// A required input (grid rows, histogram, model) is absent.
    #[error("missing data: {0}")]
    MissingData(String),

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Well-formed rows whose values violate an invariant.
    #[error("{} invalid row(s): {}", .0.len(), format_rows(.0))]
    InvalidRows(Vec<RowIssue>),

    #[error("i/o error: {0}")]
    Io(String),
}

/// One rejected input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

fn format_rows(rows: &[RowIssue]) -> String {
    rows.iter()
        .map(|r| format!("line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Checks that `x` is a finite number inside `[lo, hi]`.
pub(crate) fn check_range(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x >= lo && x <= hi {
        Ok(())
    } else {
        Err(domain(format!("{name} = {x} outside [{lo}, {hi}]")))
    }
}
