use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("rank deficiency at column {column}: residual norm {residual:e} below tolerance {tolerance:e}")]
    RankDeficient {
        column: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("identity check failed: {0}")]
    IdentityViolation(String),

    #[error("audit failure at replicate {rep_id}: quadform {quadform:e} vs direct {direct:e} (rel. diff {rel_diff:e})")]
    AuditFailure {
        rep_id: u64,
        quadform: f64,
        direct: f64,
        rel_diff: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error, following the CLI contract:
    /// 1 for failed checks, 2 for usage and configuration problems,
    /// 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidParameter(_) => 2,
            Error::Io { .. } | Error::Csv(_) => 3,
            Error::Json(e) if e.is_io() => 3,
            Error::Json(_) => 2,
            _ => 1,
        }
    }
}
