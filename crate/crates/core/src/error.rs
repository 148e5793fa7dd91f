use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("column `{column}` is declared but absent from {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{column}`: {reason}")]
    Encoding { column: String, reason: String },

    #[error("protected feature `{feature}`: {reason}")]
    Groups { feature: String, reason: String },

    #[error("cannot split {n} rows into {k} folds")]
    TooFewRows { n: usize, k: usize },

    #[error("training failed: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("confusion counts are all zero")]
    EmptyCounts,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("metrics matrix: {0}")]
    Matrix(String),

    #[error("clustering: {0}")]
    Cluster(String),

    #[error("pca: {0}")]
    Pca(String),

    #[error("robustness: {0}")]
    Robustness(String),

    #[error("render: {0}")]
    Render(String),

    #[error("bundle schema: {0}")]
    Schema(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}, row {row}: {reason}")]
    Prediction {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("dataset `{dataset}`, feature `{feature}`, seed {seed}, stage {stage}: {source}")]
    Stage {
        dataset: String,
        feature: String,
        seed: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The pipeline stage this error was raised in, if it carries one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
