use std::path::PathBuf;

/// Everything that can go wrong while loading data, fitting, compressing or
/// evaluating an ensemble.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown outcome column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("missing value at row {row}, col {col}")]
    MissingValue { row: usize, col: String },
    #[error("non-numeric value `{value}` at row {row}, col {col}")]
    NonNumeric { row: usize, col: String, value: String },
    #[error("outcome has a single class")]
    SingleClass,
    #[error("binary outcome has more than two labels (saw `{0}`)")]
    TooManyLabels(String),
    #[error("class with {count} observations cannot be stratified into {folds} folds")]
    ClassTooSmall { count: usize, folds: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("{n_obs} observations are too few for {n_params} parameters")]
    TooFewObservations { n_obs: usize, n_params: usize },
    #[error("non-finite likelihood")]
    NonFiniteLikelihood,
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("bootstrap sample lacked both classes after {0} attempts")]
    DegenerateBootstrap(usize),
    #[error("k = {k} is outside 1..={d}")]
    KOutOfRange { k: usize, d: usize },
    #[error("significance matrix has no term columns")]
    NoTerms,
    #[error("paired differences have zero variance")]
    DegenerateDifferences,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
