use std::io;

use crate::types::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid cloud: {}", format_violations(.0))]
    InvalidCloud(Vec<Violation>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("feature file: bad magic {found:?}, expected \"FSIM\"")]
    BadMagic { found: [u8; 4] },

    #[error("feature file truncated: expected {expected} bytes of payload, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("cannot take {k} landmarks from {n} points")]
    InvalidLandmarkCount { k: usize, n: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch ({what}): expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cloud carries no ground-truth instance labels")]
    MissingGroundTruth,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
