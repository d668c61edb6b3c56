use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("non-finite sample {value} at step {step}")]
    NonFiniteSample { step: u64, value: f64 },

    #[error(
        "AUC undefined: need at least one positive and one negative item (got {n_pos} positive, {n_neg} negative)"
    )]
    UndefinedAuc { n_pos: usize, n_neg: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unlabeled input: {0}")]
    Unlabeled(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
