use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{0}: starting vector is zero")]
    ZeroStart(&'static str),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-positive theta {value} in group {group}")]
    NonPositiveTheta { group: usize, value: f64 },

    #[error("column {column} of the forward operator is zero; the data carry no information about it")]
    ZeroColumn { column: usize },

    #[error("no admissible root in bracket [{lo}, {hi}]: residuals {f_lo} and {f_hi} have equal sign")]
    NoRoot {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("invalid discrepancy bracket: h({alpha_min}) = {h_min}, h({alpha_max}) = {h_max}, target {target}")]
    InvalidBracket {
        alpha_min: f64,
        alpha_max: f64,
        h_min: f64,
        h_max: f64,
        target: f64,
    },

    #[error("materializing a {rows}x{cols} matrix exceeds the size cap of {cap} entries")]
    SizeCap { rows: usize, cols: usize, cap: usize },

    #[error("inner solver failed: {0}")]
    InnerSolver(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
