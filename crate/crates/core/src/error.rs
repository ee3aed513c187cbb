use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative spike time {0}")]
    NegativeTime(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("argument {0} is below -1/e, outside the principal branch domain")]
    LambertDomain(f64),

    #[error("causal set inconsistent with inputs: {0}")]
    InconsistentCausalSet(String),

    #[error("variant {0} has no analytic gradient")]
    UnsupportedVariant(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("feature {index} = {value} lies outside [0, 1]")]
    FeatureRange { index: usize, value: f64 },

    #[error("forward record is stale (recorded at revision {recorded}, network is at {current})")]
    StaleRecord { recorded: u64, current: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown attack label {0:?}")]
    UnknownLabel(String),

    #[error("encoded width {actual} does not match the expected width {expected}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("corrupted container: {0}")]
    Corrupted(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's inputs rather than by a bug.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Json(_))
    }
}
