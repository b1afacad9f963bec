use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed NIfTI-1 file: {0}")]
    Format(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("truncated data section: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("datatype {datatype} cannot represent the data exactly: {detail}")]
    Precision { datatype: &'static str, detail: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("empty cohort: no records to summarize")]
    EmptyCohort,

    #[error("invalid phantom spec: {0}")]
    Spec(String),

    #[error("invalid pipeline parameters: {0}")]
    Params(String),

    #[error("refusing to overwrite existing {0} (use --force)")]
    Exists(PathBuf),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
