use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimizer received non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate bandwidth for column {column}: zero spread")]
    DegenerateBandwidth { column: usize },

    #[error("grid coverage: {0}")]
    GridCoverage(String),

    #[error("malformed interval at row {row}: lo {lo} > hi {hi}")]
    MalformedInterval { row: usize, lo: f64, hi: f64 },

    #[error("{path}: line {line}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("internal numeric failure: {0}")]
    Numeric(String),

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the root cause is a diverged training run.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Diverged { .. } => true,
            Error::Replication { source, .. } => source.is_divergence(),
            _ => false,
        }
    }

    /// True when the root cause is a filesystem error.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Csv(_) => true,
            Error::Replication { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
