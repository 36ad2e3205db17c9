use std::path::PathBuf;

use chrono::NaiveDateTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ingestion
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed header: column `{0}`")]
    MalformedHeader(String),
    #[error("unparseable timestamp at data row {row}: `{value}`")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("unparseable value at data row {row}, column `{column}`: `{value}`")]
    UnparseableValue { row: usize, column: String, value: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),
    #[error("timestamp {0} is not on an hour boundary")]
    NotHourAligned(NaiveDateTime),
    #[error("column name collision: `{0}`")]
    ColumnNameCollision(String),
    #[error("empty time range")]
    EmptyRange,
    #[error("column `{0}` has no observed values")]
    AllMissingColumn(String),
    #[error("invalid imputation policy: {0}")]
    InvalidPolicy(String),

    // frame
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("frame index is not a complete hourly grid")]
    NotHourly,
    #[error("insufficient length: need more than {required} rows, got {actual}")]
    InsufficientLength { required: usize, actual: usize },
    #[error("anchor mismatch: {0}")]
    AnchorMismatch(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    // statistics
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("residuals are identically zero")]
    ZeroResiduals,

    // estimation
    #[error("insufficient observations: {observations} rows for {regressors} regressors")]
    InsufficientObservations { observations: usize, regressors: usize },
    #[error("singular design: numerical rank {rank} < {columns} columns")]
    SingularDesign { rank: usize, columns: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("`{0}` is not a permutation of the model columns")]
    BadPermutation(String),
    #[error("every grid cell failed")]
    NoFittableCell,

    // io
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
