use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can surface. `kind()` gives the stable category
/// name printed by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
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
    #[error("file {0} has no header or no data rows")]
    EmptyFile(PathBuf),
    #[error("schema file {0} not found")]
    SchemaNotFound(PathBuf),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("unknown category `{value}` in column `{column}` at row {row}")]
    UnknownCategory {
        column: String,
        row: usize,
        value: String,
    },
    #[error("unparseable numeric `{value}` in column `{column}` at row {row}")]
    UnparseableNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column `{column}` has {count} distinct values, more than the allowed {max}")]
    VocabularyOverflow {
        column: String,
        count: usize,
        max: usize,
    },
    #[error("train fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("numeric column `{0}` is constant")]
    ConstantColumn(String),
    #[error("embedding dimension {0} is odd")]
    OddDimension(usize),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("diffusion step {step} outside [1, {max}]")]
    StepOutOfRange { step: usize, max: usize },
    #[error("non-finite loss ({loss}) at {context}")]
    NonFiniteLoss { loss: f64, context: String },
    #[error("column `{0}` is empty")]
    EmptyColumn(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no label column configured")]
    MissingLabelColumn,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::EmptyFile(_) => "EmptyFile",
            Error::SchemaNotFound(_) => "SchemaNotFound",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::MissingColumn(_) => "MissingColumn",
            Error::UnknownCategory { .. } => "UnknownCategory",
            Error::UnparseableNumeric { .. } => "UnparseableNumeric",
            Error::VocabularyOverflow { .. } => "VocabularyOverflow",
            Error::InvalidFraction(_) => "InvalidFraction",
            Error::ConstantColumn(_) => "ConstantColumn",
            Error::OddDimension(_) => "OddDimension",
            Error::InvalidRange(_) => "InvalidRange",
            Error::StepOutOfRange { .. } => "StepOutOfRange",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptyColumn(_) => "EmptyColumn",
            Error::EmptyDataset => "EmptyDataset",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::MissingLabelColumn => "MissingLabelColumn",
            Error::UnknownLabel(_) => "UnknownLabel",
            Error::CorruptCheckpoint(_) => "CorruptCheckpoint",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    /// Process exit code: 2 input error, 3 training divergence, 4 corrupt checkpoint.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteLoss { .. } => 3,
            Error::CorruptCheckpoint(_) => 4,
            _ => 2,
        }
    }
}
