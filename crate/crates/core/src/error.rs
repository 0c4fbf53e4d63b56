use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} units")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("fold count k={k} invalid for n={n} (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("need at least {needed} distinct {what} ids, found {found}")]
    InsufficientClusters { what: &'static str, needed: usize, found: usize },

    #[error("fold {fold} has an empty training set")]
    EmptyTrainingFold { fold: usize },

    #[error("feature width mismatch: model expects {expected} columns, got {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("IRLS did not converge after {iterations} iterations")]
    IrlsDivergence { iterations: usize },

    #[error("propensity {0} outside (0, 1)")]
    InvalidPropensity(f64),

    #[error("variance method {method} is incompatible with {structure} dependence")]
    IncompatibleVariance { method: &'static str, structure: &'static str },

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("size {size}, replicate {replicate}: {source}")]
    Replicate {
        size: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold { fold, source: Box::new(self) }
    }
}
