//! Dataset assembly, feature-matrix CSV I/O, z-score scaling and the
//! stratified train/validation split.

mod csv_io;
mod dataset;
mod scaler;
mod split;

pub use csv_io::{csv_header, format_value, read_csv, write_csv, FeatureRow, LABEL_BENIGN, LABEL_MALICIOUS, LABEL_UNLABELED};
pub use dataset::Dataset;
pub use scaler::{fit_scaler, Scaler};
pub use split::split_train_validation;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("cannot stratify: class {label} has {count} sample(s), need at least 2")]
    CannotStratify { label: u8, count: usize },
    #[error("validation fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("expected {expected} feature columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("unexpected CSV header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
